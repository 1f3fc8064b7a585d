//! Gauss-Legendre quadrature against the Gamma density, used to take
//! expectations over the kernel spread when assembling theoretical moments.

use crate::error::{invalid, Result};

/// Nodes and normalized weights approximating `E[f(sigma)]` for a Gamma
/// prior: `E[f] ~ sum_k w_k f(sigma_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Build a rule from explicit nodes and weights; weights are
    /// renormalized to sum to one.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(invalid("nodes and weights must be non-empty and equal length"));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) || nodes[0] <= 0.0 {
            return Err(invalid("nodes must be strictly increasing and positive"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(invalid("weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("weights must have positive total mass"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { nodes, weights })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Approximate expectation of a scalar function.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Lanczos approximation of ln Gamma for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// Lentz continued fraction for the complement otherwise.
fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a,x) = x^a e^-x / Gamma(a) * sum_{n>=0} x^n / (a (a+1) ... (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (log_prefix + sum.ln()).exp()
    } else {
        // Q(a,x) via continued fraction, then P = 1 - Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - (log_prefix.exp()) * f
    }
}

/// Gamma(a, rate beta) density.
fn gamma_pdf(a: f64, beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (a * beta.ln() + (a - 1.0) * x.ln() - beta * x - ln_gamma(a)).exp()
}

/// Gamma(a, rate beta) CDF.
fn gamma_cdf(a: f64, beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        reg_lower_gamma(a, beta * x)
    }
}

/// Quantile of Gamma(a, rate beta) by bisection on the CDF.
fn gamma_quantile(a: f64, beta: f64, p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut hi = a / beta;
    while gamma_cdf(a, beta, hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_cdf(a, beta, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence up to degree m.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=m {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Build an M-node rule for expectations over the Gamma(a, beta) prior:
/// Gauss-Legendre nodes placed in log-spread between the 1e-8 and 1-1e-8
/// quantiles, weights proportional to Legendre weight times Gamma density
/// times the log-substitution Jacobian, renormalized to sum to one.
///
/// The log substitution matters: integrands built from Gaussian kernels
/// have an essential singularity at spread zero, and linear node placement
/// stalls far above the accuracy the moment pipeline needs.
pub fn gamma_quadrature(a: f64, beta: f64, m: usize) -> Result<QuadratureRule> {
    gamma_quadrature_panels(a, beta, m, 4)
}

/// [`gamma_quadrature`] with an explicit panel count: the log-spread range
/// is split into equal panels, each carrying its own Gauss-Legendre nodes.
pub fn gamma_quadrature_panels(a: f64, beta: f64, m: usize, panels: usize) -> Result<QuadratureRule> {
    if !(a > 0.0) || !(beta > 0.0) {
        return Err(invalid("gamma parameters must be > 0"));
    }
    if panels == 0 {
        return Err(invalid("panel count must be >= 1"));
    }
    if m < 2 || m % panels != 0 {
        return Err(invalid(format!(
            "node count must be >= 2 and divisible by the panel count, got {m}/{panels}"
        )));
    }
    let q_lo = gamma_quantile(a, beta, 1e-8);
    let q_hi = gamma_quantile(a, beta, 1.0 - 1e-8);
    let (u_lo, u_hi) = (q_lo.ln(), q_hi.ln());
    let per_panel = m / panels;
    let (t, wl) = gauss_legendre(per_panel);
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let step = (u_hi - u_lo) / panels as f64;
    for p in 0..panels {
        let lo = u_lo + step * p as f64;
        let mid = lo + 0.5 * step;
        let rad = 0.5 * step;
        for (&ti, &wi) in t.iter().zip(&wl) {
            let x = (mid + rad * ti).exp();
            nodes.push(x);
            weights.push(wi * gamma_pdf(a, beta, x) * x);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(QuadratureRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        for (x, expect) in [(1.0, 0.0), (2.0, 0.0), (5.0, 24.0f64.ln()), (0.5, std::f64::consts::PI.sqrt().ln())] {
            assert!((ln_gamma(x) - expect).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn incomplete_gamma_matches_closed_forms() {
        // P(1,x) = 1 - e^-x; P(2,x) = 1 - e^-x (1+x); P(3,x) = 1 - e^-x (1+x+x^2/2).
        for x in [0.05f64, 0.5, 1.0, 2.5, 8.0, 30.0] {
            let p1 = 1.0 - (-x).exp();
            let p2 = 1.0 - (-x).exp() * (1.0 + x);
            let p3 = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
            assert!((reg_lower_gamma(1.0, x) - p1).abs() < 1e-12);
            assert!((reg_lower_gamma(2.0, x) - p2).abs() < 1e-12);
            assert!((reg_lower_gamma(3.0, x) - p3).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-8, 0.01, 0.5, 0.99, 1.0 - 1e-8] {
            let q = gamma_quantile(2.0, 1.0, p);
            assert!((gamma_cdf(2.0, 1.0, q) - p).abs() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(5);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let quad_x2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!((quad_x2 - 2.0 / 3.0).abs() < 1e-14);
        // Degree-9 polynomial integrates exactly with 5 nodes.
        let quad_x8: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(8)).sum();
        assert!((quad_x8 - 2.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn gamma_rule_normalizes_and_recovers_moments() {
        let rule = gamma_quadrature(2.0, 1.0, 64).unwrap();
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14, "weights sum to one");
        assert!(rule.weights().iter().all(|&w| w >= 0.0));
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(rule.nodes().iter().all(|&x| x > 0.0));

        let mean = rule.expect(|s| s);
        assert!((mean - 2.0).abs() < 1e-6, "mean = {mean}");
        let second = rule.expect(|s| s * s);
        assert!((second - 6.0).abs() < 1e-5, "second = {second}");
    }

    #[test]
    fn invalid_parameters_error() {
        assert!(gamma_quadrature(0.0, 1.0, 8).is_err());
        assert!(gamma_quadrature(2.0, -1.0, 8).is_err());
        assert!(gamma_quadrature(2.0, 1.0, 1).is_err());
    }
}
