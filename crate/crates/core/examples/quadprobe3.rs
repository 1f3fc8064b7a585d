// scratch probe: targeted panels in linear sigma via from_parts
use blindeconv::dct::make_dictionary;
use blindeconv::moments::{theoretical_moments, MomentSet};
use blindeconv::priors::{KernelPrior, NoiseModel, SignalPrior};
use blindeconv::quad::QuadratureRule;

fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1; p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 { break; }
        }
        nodes[i] = -x; nodes[m-1-i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w; weights[m-1-i] = w;
    }
    (nodes, weights)
}

fn rule_with_edges(edges: &[f64], per: usize) -> QuadratureRule {
    let (t, wl) = gauss_legendre(per);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let rad = 0.5 * (hi - lo);
        for (&ti, &wi) in t.iter().zip(&wl) {
            let x: f64 = mid + rad * ti;
            nodes.push(x);
            weights.push(wi * rad * x * (-x).exp()); // Gamma(2,1) density
        }
    }
    QuadratureRule::from_parts(nodes, weights).unwrap()
}

fn main() {
    let dict = make_dictionary(8, 16, 42).unwrap();
    let signal = SignalPrior::new(dict, 0.5).unwrap();
    let kernel = KernelPrior::new(5, 2.0, 1.0).unwrap();
    let noise = NoiseModel::new(0.0009).unwrap();
    let q_lo = 1.488e-4;
    let q_hi = 25.33;
    // 8 panels x m/8 nodes: constant region, morph region resolved, tail.
    let edges = [q_lo, 0.15, 0.35, 0.7, 1.4, 2.8, 5.6, 11.2, q_hi];
    let mut prev: Option<MomentSet> = None;
    for per in [4usize, 8, 16, 32] {
        let rule = rule_with_edges(&edges, per);
        let mo = theoretical_moments(&signal, &kernel, &noise, &rule).unwrap();
        if let Some(p) = prev {
            let rel = |a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>| {
                (a - b).amax() / b.amax()
            };
            println!(
                "M={:4}  dCyy={:.3e}  dCxy={:.3e}  dChy={:.3e}",
                per * 8,
                rel(&p.c_yy, &mo.c_yy),
                rel(&p.c_xy, &mo.c_xy),
                rel(&p.c_hy, &mo.c_hy),
            );
        }
        prev = Some(mo);
    }
}
