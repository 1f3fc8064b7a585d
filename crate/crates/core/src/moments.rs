//! First and second moments of the triple (x, h, y): computed in closed
//! form from the priors (expectations over the kernel spread taken by
//! quadrature) or estimated from a sample.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::conv::{conv2_kernel, embed_kernel, filter_spectrum, plans_for};
use crate::error::{invalid, Result};
use crate::image::{Image, Kernel};
use crate::priors::{gaussian_kernel, KernelPrior, NoiseModel, ProblemInstance, SignalPrior};
use crate::quad::QuadratureRule;

/// Provenance of a moment set.
#[derive(Debug, Clone)]
pub enum MomentKind {
    /// Computed from the priors; carries what the Tikhonov verification
    /// needs to rebuild the signal covariance operator.
    Theoretical { signal: SignalPrior, c_eps: f64 },
    /// Estimated from `n_samples` instances.
    Empirical { n_samples: usize },
}

/// Means and (cross-)covariances of (x, h, y). Images are vectorized
/// row-major to length N = n^2; kernels to length D = d^2.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub mean_x: DVector<f64>,
    pub mean_h: DVector<f64>,
    pub mean_y: DVector<f64>,
    /// N x N cross-covariance of x and y.
    pub c_xy: DMatrix<f64>,
    /// D x N cross-covariance of h and y.
    pub c_hy: DMatrix<f64>,
    /// N x N covariance of y.
    pub c_yy: DMatrix<f64>,
    pub kind: MomentKind,
}

impl MomentSet {
    pub fn image_side(&self) -> usize {
        (self.mean_x.len() as f64).sqrt().round() as usize
    }

    pub fn kernel_side(&self) -> usize {
        (self.mean_h.len() as f64).sqrt().round() as usize
    }

    /// Mean kernel as a simplex point (a mixture of simplex points).
    pub fn mean_kernel(&self) -> Result<Kernel> {
        let d = self.kernel_side();
        let mut v: Vec<f64> = self.mean_h.iter().copied().collect();
        // Clip the roundoff-level negatives an empirical mean can carry.
        let mut sum = 0.0;
        for e in &mut v {
            if *e < 0.0 {
                *e = 0.0;
            }
            sum += *e;
        }
        for e in &mut v {
            *e /= sum;
        }
        Kernel::new(d, v)
    }
}

/// Convolve every row of a row-major N x N matrix (rows treated as n x n
/// images) with the filter spectrum, in parallel; the output is exactly
/// `M * H^T` for the convolution operator H.
fn rowwise_conv(mat: &[f64], n: usize, spec: &[rustfft::num_complex::Complex<f64>]) -> Vec<f64> {
    let nn = n * n;
    let mut out = vec![0.0; mat.len()];
    out.par_chunks_mut(nn)
        .zip(mat.par_chunks(nn))
        .for_each(|(dst, src)| {
            let plans = plans_for(n);
            let conv = crate::conv::conv_with_spectrum(&plans, spec, src);
            dst.copy_from_slice(&conv);
        });
    out
}

fn transpose_square(mat: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; mat.len()];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = mat[i * n + j];
        }
    }
    out
}

/// Closed-form moments of the synthetic model, with expectations over the
/// kernel spread approximated by the quadrature rule.
///
/// With H(s) the circular-convolution operator of the embedded Gaussian of
/// spread s, Mbar the operator of the mean kernel and
/// `S_x = C_xx + mean_x mean_x^T`:
///
/// - `mean_x = D^T mu_alpha`, `C_xx = 2 b^2 D^T D` (applied through the
///   dictionary, never materialized),
/// - `mean_h = sum_k w_k g(s_k)`, `C_hh = sum_k w_k g g^T - mean_h mean_h^T`,
/// - `mean_y = Mbar mean_x`,
/// - `C_xy = C_xx Mbar^T`,
/// - `C_hy = C_hh Xbar^T` with Xbar the kernel-to-image operator of mean_x,
/// - `C_yy = sum_k w_k H(s_k) S_x H(s_k)^T + c_eps I - mean_y mean_y^T`.
pub fn theoretical_moments(
    signal: &SignalPrior,
    kernel: &KernelPrior,
    noise: &NoiseModel,
    rule: &QuadratureRule,
) -> Result<MomentSet> {
    let dict = &signal.dict;
    let n = dict.side();
    let nn = n * n;
    let d = kernel.d;
    let dd = d * d;
    let k_atoms = dict.atom_count();
    if d > n {
        return Err(invalid(format!("kernel side {d} exceeds image side {n}")));
    }

    let atoms: Vec<Vec<f64>> = (0..k_atoms).map(|k| dict.atom(k).into_vec()).collect();
    let mean_x: Vec<f64> = dict.mean_image().into_vec();
    let two_b_sq = 2.0 * signal.b * signal.b;

    // Kernel-side moments over the spread prior.
    let mut mean_h = vec![0.0; dd];
    let node_kernels: Vec<Vec<f64>> = rule
        .nodes()
        .iter()
        .map(|&s| Ok(gaussian_kernel(s, d)?.into_vec()))
        .collect::<Result<_>>()?;
    for (g, &w) in node_kernels.iter().zip(rule.weights()) {
        for (acc, &v) in mean_h.iter_mut().zip(g) {
            *acc += w * v;
        }
    }
    let mut c_hh = vec![0.0; dd * dd];
    for (g, &w) in node_kernels.iter().zip(rule.weights()) {
        for i in 0..dd {
            let wi = w * g[i];
            for j in 0..dd {
                c_hh[i * dd + j] += wi * g[j];
            }
        }
    }
    for i in 0..dd {
        for j in 0..dd {
            c_hh[i * dd + j] -= mean_h[i] * mean_h[j];
        }
    }

    let mean_kernel = Kernel::new(d, mean_h.clone())?;
    let mean_x_img = Image::from_raw(n, mean_x.clone());
    let mean_y: Vec<f64> = conv2_kernel(&mean_x_img, &mean_kernel)?.into_vec();

    // S_x = 2 b^2 sum_k a_k a_k^T + mean_x mean_x^T, dense.
    let mut s_x = vec![0.0; nn * nn];
    s_x.par_chunks_mut(nn).enumerate().for_each(|(i, row)| {
        for a in &atoms {
            let ai = two_b_sq * a[i];
            if ai == 0.0 {
                continue;
            }
            for (r, &aj) in row.iter_mut().zip(a.iter()) {
                *r += ai * aj;
            }
        }
        let mi = mean_x[i];
        for (r, &mj) in row.iter_mut().zip(mean_x.iter()) {
            *r += mi * mj;
        }
    });

    // C_yy accumulation over quadrature nodes: H S H^T via two row-wise
    // convolution passes and a transpose.
    let plans = plans_for(n);
    let mut c_acc = vec![0.0; nn * nn];
    for (g, &w) in node_kernels.iter().zip(rule.weights()) {
        let kern = Kernel::new(d, g.clone())?;
        let spec = filter_spectrum(&plans, &embed_kernel(&kern, n)?);
        let a = rowwise_conv(&s_x, n, &spec); // S H^T
        let at = transpose_square(&a, nn); // H S
        let t = rowwise_conv(&at, n, &spec); // H S H^T
        c_acc
            .par_chunks_mut(nn)
            .zip(t.par_chunks(nn))
            .for_each(|(acc, row)| {
                for (av, &tv) in acc.iter_mut().zip(row) {
                    *av += w * tv;
                }
            });
    }
    let mut c_yy = c_acc;
    for i in 0..nn {
        c_yy[i * nn + i] += noise.c_eps;
        let myi = mean_y[i];
        let row = &mut c_yy[i * nn..(i + 1) * nn];
        for (v, &myj) in row.iter_mut().zip(mean_y.iter()) {
            *v -= myi * myj;
        }
    }

    // C_xy = 2 b^2 sum_k a_k (Mbar a_k)^T.
    let mean_spec = filter_spectrum(&plans, &embed_kernel(&mean_kernel, n)?);
    let conv_atoms: Vec<Vec<f64>> = atoms
        .par_iter()
        .map(|a| {
            let plans = plans_for(n);
            crate::conv::conv_with_spectrum(&plans, &mean_spec, a)
        })
        .collect();
    let mut c_xy = vec![0.0; nn * nn];
    c_xy.par_chunks_mut(nn).enumerate().for_each(|(i, row)| {
        for (a, ca) in atoms.iter().zip(&conv_atoms) {
            let ai = two_b_sq * a[i];
            if ai == 0.0 {
                continue;
            }
            for (r, &cj) in row.iter_mut().zip(ca.iter()) {
                *r += ai * cj;
            }
        }
    });

    // C_hy = C_hh Xbar^T; row j of Xbar^T is mean_x circularly shifted by
    // the j-th kernel offset.
    let half = (d / 2) as isize;
    let n_i = n as isize;
    let shifts: Vec<Vec<f64>> = (0..dd)
        .map(|t| {
            let oi = (t / d) as isize - half;
            let oj = (t % d) as isize - half;
            let mut s = vec![0.0; nn];
            for u in 0..n_i {
                for v in 0..n_i {
                    let su = (u - oi).rem_euclid(n_i) as usize;
                    let sv = (v - oj).rem_euclid(n_i) as usize;
                    s[(u * n_i + v) as usize] = mean_x[su * n + sv];
                }
            }
            s
        })
        .collect();
    let mut c_hy = vec![0.0; dd * nn];
    c_hy.par_chunks_mut(nn).enumerate().for_each(|(i, row)| {
        for (j, shift) in shifts.iter().enumerate() {
            let cij = c_hh[i * dd + j];
            if cij == 0.0 {
                continue;
            }
            for (r, &sv) in row.iter_mut().zip(shift.iter()) {
                *r += cij * sv;
            }
        }
    });

    Ok(MomentSet {
        mean_x: DVector::from_vec(mean_x),
        mean_h: DVector::from_vec(mean_h),
        mean_y: DVector::from_vec(mean_y),
        c_xy: DMatrix::from_row_slice(nn, nn, &c_xy),
        c_hy: DMatrix::from_row_slice(dd, nn, &c_hy),
        c_yy: DMatrix::from_row_slice(nn, nn, &c_yy),
        kind: MomentKind::Theoretical {
            signal: signal.clone(),
            c_eps: noise.c_eps,
        },
    })
}

/// Sample means and unbiased sample (cross-)covariances over the first
/// `n_samples` instances.
pub fn empirical_moments(instances: &[ProblemInstance], n_samples: usize) -> Result<MomentSet> {
    if n_samples < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    if instances.len() < n_samples {
        return Err(invalid(format!(
            "requested {n_samples} samples but only {} available",
            instances.len()
        )));
    }
    let sample = &instances[..n_samples];
    let nn = sample[0].x.len();
    let dd = sample[0].h.as_slice().len();
    let count = n_samples as f64;

    // Means accumulated as deviations from the first sample: identical
    // samples then yield exactly zero deviations and covariances.
    let first = &sample[0];
    let mut mean_x = vec![0.0; nn];
    let mut mean_h = vec![0.0; dd];
    let mut mean_y = vec![0.0; nn];
    for inst in sample {
        for ((acc, &v), &r) in mean_x.iter_mut().zip(inst.x.as_slice()).zip(first.x.as_slice()) {
            *acc += v - r;
        }
        for ((acc, &v), &r) in mean_h.iter_mut().zip(inst.h.as_slice()).zip(first.h.as_slice()) {
            *acc += v - r;
        }
        for ((acc, &v), &r) in mean_y.iter_mut().zip(inst.y.as_slice()).zip(first.y.as_slice()) {
            *acc += v - r;
        }
    }
    for (v, &r) in mean_x.iter_mut().zip(first.x.as_slice()) {
        *v = r + *v / count;
    }
    for (v, &r) in mean_h.iter_mut().zip(first.h.as_slice()) {
        *v = r + *v / count;
    }
    for (v, &r) in mean_y.iter_mut().zip(first.y.as_slice()) {
        *v = r + *v / count;
    }

    let denom = count - 1.0;
    let mut c_xy = vec![0.0; nn * nn];
    c_xy.par_chunks_mut(nn).enumerate().for_each(|(i, row)| {
        for inst in sample {
            let xi = inst.x.as_slice()[i] - mean_x[i];
            if xi == 0.0 {
                continue;
            }
            for ((r, &yv), &my) in row.iter_mut().zip(inst.y.as_slice()).zip(mean_y.iter()) {
                *r += xi * (yv - my);
            }
        }
        for r in row.iter_mut() {
            *r /= denom;
        }
    });
    let mut c_yy = vec![0.0; nn * nn];
    c_yy.par_chunks_mut(nn).enumerate().for_each(|(i, row)| {
        for inst in sample {
            let yi = inst.y.as_slice()[i] - mean_y[i];
            if yi == 0.0 {
                continue;
            }
            for ((r, &yv), &my) in row.iter_mut().zip(inst.y.as_slice()).zip(mean_y.iter()) {
                *r += yi * (yv - my);
            }
        }
        for r in row.iter_mut() {
            *r /= denom;
        }
    });
    let mut c_hy = vec![0.0; dd * nn];
    c_hy.par_chunks_mut(nn).enumerate().for_each(|(i, row)| {
        for inst in sample {
            let hi = inst.h.as_slice()[i] - mean_h[i];
            if hi == 0.0 {
                continue;
            }
            for ((r, &yv), &my) in row.iter_mut().zip(inst.y.as_slice()).zip(mean_y.iter()) {
                *r += hi * (yv - my);
            }
        }
        for r in row.iter_mut() {
            *r /= denom;
        }
    });

    Ok(MomentSet {
        mean_x: DVector::from_vec(mean_x),
        mean_h: DVector::from_vec(mean_h),
        mean_y: DVector::from_vec(mean_y),
        c_xy: DMatrix::from_row_slice(nn, nn, &c_xy),
        c_hy: DMatrix::from_row_slice(dd, nn, &c_hy),
        c_yy: DMatrix::from_row_slice(nn, nn, &c_yy),
        kind: MomentKind::Empirical { n_samples },
    })
}
