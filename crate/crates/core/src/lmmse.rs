//! The closed-form blind LMMSE estimator
//! `x_hat = E[x] + C_xy C_yy^-1 (y - E[y])`,
//! `h_hat = E[h] + C_hy C_yy^-1 (y - E[y])`,
//! and the numerical verification that the signal estimate solves the
//! equivalent generalized Tikhonov problem.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::conv::{conv_with_spectrum, corr_with_spectrum, embed_grid, filter_spectrum, plans_for};
use crate::error::{invalid, Error, Result};
use crate::image::{Image, KernelGrid};
use crate::moments::{MomentKind, MomentSet};

/// Joint LMMSE point estimate. The kernel estimate is affine in y and is
/// not constrained to the simplex.
#[derive(Debug, Clone)]
pub struct LmmseEstimate {
    pub x_hat: Image,
    pub h_hat: KernelGrid,
}

/// A moment set with its observation covariance factored once, for
/// estimating many observations.
pub struct LmmseFilter<'a> {
    moments: &'a MomentSet,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> LmmseFilter<'a> {
    /// Factor `C_yy + ridge I`. Fails with a singular-moments error when the
    /// ridged covariance is not positive definite.
    pub fn new(moments: &'a MomentSet, ridge: f64) -> Result<Self> {
        if ridge < 0.0 {
            return Err(invalid(format!("ridge must be >= 0, got {ridge}")));
        }
        let mut c = moments.c_yy.clone();
        if ridge > 0.0 {
            for i in 0..c.nrows() {
                c[(i, i)] += ridge;
            }
        }
        let chol = Cholesky::new(c).ok_or_else(|| {
            Error::SingularMoments(format!(
                "observation covariance is not positive definite at ridge {ridge}"
            ))
        })?;
        Ok(Self { moments, chol })
    }

    /// Estimate one observation.
    pub fn estimate(&self, y: &Image) -> Result<LmmseEstimate> {
        let m = self.moments;
        let n = m.image_side();
        if y.side() != n {
            return Err(invalid(format!(
                "observation side {} does not match moments side {n}",
                y.side()
            )));
        }
        let innovation = DVector::from_row_slice(y.as_slice()) - &m.mean_y;
        let z = self.chol.solve(&innovation);
        let x_hat = &m.mean_x + &m.c_xy * &z;
        let h_hat = &m.mean_h + &m.c_hy * &z;
        Ok(LmmseEstimate {
            x_hat: Image::new(n, x_hat.iter().copied().collect())?,
            h_hat: KernelGrid::new(m.kernel_side(), h_hat.iter().copied().collect())?,
        })
    }
}

/// One-shot LMMSE estimate; factoring is cached by [`LmmseFilter`] when many
/// observations share the same moments.
pub fn lmmse_estimate(m: &MomentSet, y: &Image, ridge: f64) -> Result<LmmseEstimate> {
    LmmseFilter::new(m, ridge)?.estimate(y)
}

/// Relative residual of the generalized Tikhonov normal equations at the
/// given signal estimate, for theoretical moments:
///
/// `min_x |Mbar x - y|^2_{C_p^-1} + |x - E[x]|^2_{C_xx^-1}`,
/// `C_p = C_yy - E[(E[h]*x)(E[h]*x)^T] + E[y] E[y]^T`.
///
/// The prior term uses the pseudo-inverse of `C_xx = 2 b^2 D^T D` on the
/// dictionary range, the only subspace where `x - E[x]` lives; the residual
/// is evaluated in coefficient space through the dictionary's analysis map.
pub fn tikhonov_residual(m: &MomentSet, est: &LmmseEstimate, y: &Image) -> Result<f64> {
    let MomentKind::Theoretical { signal, .. } = &m.kind else {
        return Err(invalid("tikhonov residual requires theoretical moments"));
    };
    let dict = &signal.dict;
    let n = m.image_side();
    let nn = n * n;
    if y.side() != n || est.x_hat.side() != n {
        return Err(invalid("dimension mismatch between moments, estimate and observation"));
    }

    // E[(Mbar x)(Mbar x)^T] = Mbar S_x Mbar^T with S_x = C_xx + E[x]E[x]^T:
    // columns through the dictionary, 2 b^2 sum_k (Mbar a_k)(Mbar a_k)^T
    // plus the mean term.
    let plans = plans_for(n);
    let mean_h_grid = KernelGrid::new(m.kernel_side(), m.mean_h.iter().copied().collect())?;
    let mean_spec = filter_spectrum(&plans, &embed_grid(&mean_h_grid, n)?);
    let two_b_sq = 2.0 * signal.b * signal.b;

    let mut mbar_sx_mbar = DMatrix::<f64>::zeros(nn, nn);
    for k in 0..dict.atom_count() {
        let ca = conv_with_spectrum(&plans, &mean_spec, dict.atom(k).as_slice());
        let v = DVector::from_vec(ca);
        mbar_sx_mbar.syger(two_b_sq, &v, &v, 1.0);
    }
    mbar_sx_mbar.syger(1.0, &m.mean_y, &m.mean_y, 1.0);
    // syger fills one triangle; mirror it.
    for i in 0..nn {
        for j in 0..i {
            mbar_sx_mbar[(j, i)] = mbar_sx_mbar[(i, j)];
        }
    }

    let mut c_p = &m.c_yy - &mbar_sx_mbar;
    let mean_y_outer = &m.mean_y * m.mean_y.transpose();
    c_p += mean_y_outer;

    let chol = Cholesky::new(c_p).ok_or_else(|| {
        Error::SingularMoments("perturbation covariance is not positive definite".into())
    })?;

    // Data-term gradient in coefficient space: D Mbar^T C_p^-1 (Mbar x - y).
    let mbar_x = conv_with_spectrum(&plans, &mean_spec, est.x_hat.as_slice());
    let resid = DVector::from_vec(mbar_x) - DVector::from_row_slice(y.as_slice());
    let w = chol.solve(&resid);
    let back = corr_with_spectrum(&plans, &mean_spec, w.as_slice());
    let term_data = DVector::from_vec(dict.analyze(&Image::from_raw(n, back))?);

    // Prior-term gradient: C_xx^+ (x - E[x]) = D (x - E[x]) / (2 b^2) in
    // coefficient space.
    let dev = Image::new(
        n,
        est.x_hat
            .as_slice()
            .iter()
            .zip(m.mean_x.iter())
            .map(|(a, b)| a - b)
            .collect(),
    )?;
    let term_prior = DVector::from_vec(dict.analyze(&dev)?) / two_b_sq;

    let residual = (&term_data + &term_prior).norm();
    let scale = term_data.norm().max(term_prior.norm());
    if scale <= f64::MIN_POSITIVE {
        return Ok(0.0);
    }
    Ok(residual / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::dct::make_dictionary;
    use crate::moments::theoretical_moments;
    use crate::priors::{
        generate_instance, stream_rng, KernelPrior, NoiseModel, SignalPrior, StreamPurpose,
    };
    use crate::quad::gamma_quadrature;

    fn reduced() -> (SignalPrior, KernelPrior, NoiseModel, MomentSet) {
        let dict = make_dictionary(8, 16, 42).unwrap();
        let signal = SignalPrior::new(dict, 0.5).unwrap();
        let kernel = KernelPrior::new(5, 2.0, 1.0).unwrap();
        let noise = NoiseModel::new(0.0009).unwrap();
        let rule = gamma_quadrature(kernel.a, kernel.beta, 64).unwrap();
        let m = theoretical_moments(&signal, &kernel, &noise, &rule).unwrap();
        (signal, kernel, noise, m)
    }

    #[test]
    fn mean_observation_maps_to_prior_means() {
        let (_, _, _, m) = reduced();
        let y = Image::new(8, m.mean_y.iter().copied().collect()).unwrap();
        let est = lmmse_estimate(&m, &y, 0.0).unwrap();
        for (v, mx) in est.x_hat.as_slice().iter().zip(m.mean_x.iter()) {
            assert!((v - mx).abs() < 1e-12);
        }
        for (v, mh) in est.h_hat.as_slice().iter().zip(m.mean_h.iter()) {
            assert!((v - mh).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_case_recovers_wiener_gain() {
        // n = 1, deterministic unit kernel, prior mean mu and variance s,
        // noise variance c: x_hat = mu + s/(s+c) (y - mu).
        let (mu, s, c) = (0.7, 1.3, 0.4);
        let m = MomentSet {
            mean_x: DVector::from_vec(vec![mu]),
            mean_h: DVector::from_vec(vec![1.0]),
            mean_y: DVector::from_vec(vec![mu]),
            c_xy: DMatrix::from_vec(1, 1, vec![s]),
            c_hy: DMatrix::from_vec(1, 1, vec![0.0]),
            c_yy: DMatrix::from_vec(1, 1, vec![s + c]),
            kind: MomentKind::Empirical { n_samples: 2 },
        };
        let y = Image::new(1, vec![2.0]).unwrap();
        let est = lmmse_estimate(&m, &y, 0.0).unwrap();
        let expect = mu + s / (s + c) * (2.0 - mu);
        assert!((est.x_hat.as_slice()[0] - expect).abs() < 1e-14);
        assert!((est.h_hat.as_slice()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_covariance_reports_singular_moments() {
        let m = MomentSet {
            mean_x: DVector::zeros(4),
            mean_h: DVector::from_vec(vec![1.0]),
            mean_y: DVector::zeros(4),
            c_xy: DMatrix::zeros(4, 4),
            c_hy: DMatrix::zeros(1, 4),
            c_yy: DMatrix::zeros(4, 4),
            kind: MomentKind::Empirical { n_samples: 2 },
        };
        let y = Image::zeros(2);
        match lmmse_estimate(&m, &y, 0.0) {
            Err(Error::SingularMoments(msg)) => {
                assert!(msg.contains("ridge"), "message should point at the ridge: {msg}")
            }
            other => panic!("expected SingularMoments, got {other:?}"),
        }
        // A positive ridge fixes it.
        assert!(lmmse_estimate(&m, &y, 1e-3).is_ok());
    }

    #[test]
    fn estimator_is_affine_in_y() {
        let (_, _, _, m) = reduced();
        let filter = LmmseFilter::new(&m, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rand_img = |rng: &mut ChaCha8Rng| {
            Image::new(8, (0..64).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap()
        };
        let y1 = rand_img(&mut rng);
        let y2 = rand_img(&mut rng);
        let delta = rand_img(&mut rng);
        let add = |a: &Image, b: &Image| {
            Image::new(
                8,
                a.as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(u, v)| u + v)
                    .collect(),
            )
            .unwrap()
        };
        let e1 = filter.estimate(&y1).unwrap();
        let e1d = filter.estimate(&add(&y1, &delta)).unwrap();
        let e2 = filter.estimate(&y2).unwrap();
        let e2d = filter.estimate(&add(&y2, &delta)).unwrap();
        for i in 0..64 {
            let g1 = e1d.x_hat.as_slice()[i] - e1.x_hat.as_slice()[i];
            let g2 = e2d.x_hat.as_slice()[i] - e2.x_hat.as_slice()[i];
            assert!((g1 - g2).abs() < 1e-8, "x increment differs at {i}");
        }
        for i in 0..25 {
            let g1 = e1d.h_hat.as_slice()[i] - e1.h_hat.as_slice()[i];
            let g2 = e2d.h_hat.as_slice()[i] - e2.h_hat.as_slice()[i];
            assert!((g1 - g2).abs() < 1e-8, "h increment differs at {i}");
        }
    }

    #[test]
    fn beats_perturbed_affine_estimators() {
        // MMSE optimality among affine estimators: perturbing the gain
        // matrix can only increase the mean squared error.
        let (signal, kernel, noise, m) = reduced();
        let filter = LmmseFilter::new(&m, 0.0).unwrap();
        let n_eval = 10_000usize;
        let instances: Vec<_> = (0..n_eval)
            .map(|i| {
                let mut rng = stream_rng(777, StreamPurpose::EvalInstance { index: i as u64 });
                generate_instance(&signal, &kernel, &noise, &mut rng)
            })
            .collect();

        let mut lmmse_mse = 0.0;
        let mut innovations = Vec::with_capacity(n_eval);
        for inst in &instances {
            let est = filter.estimate(&inst.y).unwrap();
            let err: f64 = est
                .x_hat
                .as_slice()
                .iter()
                .zip(inst.x.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            lmmse_mse += err;
            innovations.push(DVector::from_row_slice(inst.y.as_slice()) - &m.mean_y);
        }
        lmmse_mse /= n_eval as f64;

        let scale = 0.01 * m.c_xy.amax();
        let mut rng = ChaCha8Rng::seed_from_u64(31337);
        for trial in 0..20 {
            let mut gain = m.c_xy.clone();
            for v in gain.iter_mut() {
                *v += scale * (rng.gen::<f64>() - 0.5) * 2.0;
            }
            let chol = Cholesky::new(m.c_yy.clone()).unwrap();
            let mut mse = 0.0;
            for (inst, innov) in instances.iter().zip(&innovations) {
                let z = chol.solve(innov);
                let xh = &m.mean_x + &gain * z;
                let err: f64 = xh
                    .iter()
                    .zip(inst.x.as_slice())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                mse += err;
            }
            mse /= n_eval as f64;
            assert!(
                lmmse_mse <= mse,
                "perturbed estimator {trial} beat LMMSE: {mse} < {lmmse_mse}"
            );
        }
    }

    #[test]
    fn tikhonov_residual_vanishes_at_lmmse_solution() {
        let (signal, kernel, noise, m) = reduced();
        let mut rng = stream_rng(555, StreamPurpose::EvalInstance { index: 0 });
        let inst = generate_instance(&signal, &kernel, &noise, &mut rng);
        let est = lmmse_estimate(&m, &inst.y, 0.0).unwrap();
        let r = tikhonov_residual(&m, &est, &inst.y).unwrap();
        assert!(r <= 1e-6, "residual {r}");

        // A 1% perturbation must blow the residual up by well over 10x.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let norm = est.x_hat.norm_sq().sqrt();
        let pert = Image::new(
            8,
            est.x_hat
                .as_slice()
                .iter()
                .map(|v| v + 0.01 * norm / 8.0 * (rng.gen::<f64>() - 0.5) * 2.0)
                .collect(),
        )
        .unwrap();
        let est_pert = LmmseEstimate { x_hat: pert, h_hat: est.h_hat.clone() };
        let r_pert = tikhonov_residual(&m, &est_pert, &inst.y).unwrap();
        assert!(r_pert > 10.0 * r.max(1e-12), "perturbed {r_pert} vs {r}");
    }

    #[test]
    fn tikhonov_residual_zero_at_mean() {
        let (_, _, _, m) = reduced();
        let y = Image::new(8, m.mean_y.iter().copied().collect()).unwrap();
        let est = lmmse_estimate(&m, &y, 0.0).unwrap();
        let r = tikhonov_residual(&m, &est, &y).unwrap();
        assert!(r <= 1e-10, "residual {r}");
    }

    #[test]
    fn tikhonov_rejects_empirical_moments() {
        let (_, _, _, m) = reduced();
        let y = Image::new(8, m.mean_y.iter().copied().collect()).unwrap();
        let est = lmmse_estimate(&m, &y, 0.0).unwrap();
        let mut emp = m.clone();
        emp.kind = MomentKind::Empirical { n_samples: 10 };
        assert!(matches!(
            tikhonov_residual(&emp, &est, &y),
            Err(Error::InvalidArgument(_))
        ));
    }
}
