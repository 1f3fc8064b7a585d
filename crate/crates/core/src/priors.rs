//! Prior distributions of the synthetic model and instance/dataset
//! generation: Laplace coefficients on the dictionary, Gamma-distributed
//! Gaussian kernel spreads, and white Gaussian pixel noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::conv::conv2_kernel;
use crate::dct::Dictionary;
use crate::error::{invalid, Result};
use crate::image::{Image, Kernel, KernelGrid};

/// Spread draws below this are rejected and resampled; keeps the Gaussian
/// kernel well conditioned at a measure-zero cost.
pub const SIGMA_GUARD: f64 = 1e-6;

/// Laplace prior over dictionary coefficients, located at the dictionary's
/// `mu_alpha` with scale `b`.
#[derive(Debug, Clone)]
pub struct SignalPrior {
    pub dict: Dictionary,
    pub b: f64,
}

impl SignalPrior {
    pub fn new(dict: Dictionary, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(invalid(format!("laplace scale must be > 0, got {b}")));
        }
        Ok(Self { dict, b })
    }
}

/// Gamma prior (shape `a`, rate `beta`) over the spread of a normalized
/// isotropic Gaussian kernel of odd side `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPrior {
    pub d: usize,
    pub a: f64,
    pub beta: f64,
}

impl KernelPrior {
    pub fn new(d: usize, a: f64, beta: f64) -> Result<Self> {
        if d == 0 || d % 2 == 0 {
            return Err(invalid(format!("kernel side must be odd, got {d}")));
        }
        if !(a > 0.0) || !(beta > 0.0) {
            return Err(invalid("gamma parameters must be > 0"));
        }
        Ok(Self { d, a, beta })
    }
}

/// Additive white Gaussian noise with per-pixel variance `c_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub c_eps: f64,
}

impl NoiseModel {
    pub fn new(c_eps: f64) -> Result<Self> {
        if !(c_eps > 0.0) {
            return Err(invalid(format!("noise variance must be > 0, got {c_eps}")));
        }
        Ok(Self { c_eps })
    }
}

/// One standard Laplace draw via the inverse CDF of a uniform variate.
#[inline]
fn standard_laplace(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    if u < 0.5 {
        (2.0 * u).ln()
    } else {
        -(2.0 * (1.0 - u)).ln()
    }
}

/// Draw a coefficient vector: coordinate k is `mu_alpha[k] + b * L` with
/// `L` standard Laplace.
pub fn sample_alpha(prior: &SignalPrior, rng: &mut impl Rng) -> Vec<f64> {
    prior
        .dict
        .mu_alpha()
        .iter()
        .map(|&mu| mu + prior.b * standard_laplace(rng))
        .collect()
}

/// Discretized isotropic Gaussian on the d x d support, weights normalized
/// to sum to one: entry at offset (i,j) is `exp(-(i^2+j^2)/(2 sigma^2)) / Z`.
pub fn gaussian_kernel(sigma: f64, d: usize) -> Result<Kernel> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be > 0, got {sigma}")));
    }
    if d == 0 || d % 2 == 0 {
        return Err(invalid(format!("kernel side must be odd, got {d}")));
    }
    let half = (d / 2) as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut data = vec![0.0; d * d];
    let mut z = 0.0;
    for r in 0..d {
        let i = r as isize - half;
        for c in 0..d {
            let j = c as isize - half;
            let v = (-((i * i + j * j) as f64) * inv).exp();
            data[r * d + c] = v;
            z += v;
        }
    }
    for v in &mut data {
        *v /= z;
    }
    Kernel::new(d, data)
}

/// Analytic derivative of the normalized Gaussian kernel with respect to
/// its spread. Entries sum to zero: the derivative is tangent to the
/// simplex.
pub fn dgaussian_dsigma(sigma: f64, d: usize) -> Result<KernelGrid> {
    let h = gaussian_kernel(sigma, d)?;
    let half = (d / 2) as isize;
    let s3 = sigma * sigma * sigma;
    let hv = h.as_slice();
    let mut rsq = vec![0.0; d * d];
    for r in 0..d {
        let i = r as isize - half;
        for c in 0..d {
            let j = c as isize - half;
            rsq[r * d + c] = (i * i + j * j) as f64;
        }
    }
    let mean_rsq: f64 = hv.iter().zip(&rsq).map(|(h, r2)| h * r2).sum();
    let data: Vec<f64> = hv
        .iter()
        .zip(&rsq)
        .map(|(h, r2)| h * (r2 - mean_rsq) / s3)
        .collect();
    Ok(KernelGrid::from_raw(d, data))
}

/// Draw a kernel spread from the Gamma prior; draws below [`SIGMA_GUARD`]
/// are resampled.
pub fn sample_sigma(prior: &KernelPrior, rng: &mut impl Rng) -> f64 {
    let gamma = Gamma::new(prior.a, 1.0 / prior.beta).expect("validated parameters");
    loop {
        let s = gamma.sample(rng);
        if s >= SIGMA_GUARD {
            return s;
        }
    }
}

/// Draw a white-noise image with per-pixel variance `c_eps`.
pub fn sample_noise(noise: &NoiseModel, n: usize, rng: &mut impl Rng) -> Image {
    let std = noise.c_eps.sqrt();
    let data: Vec<f64> = (0..n * n)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Image::from_raw(n, data)
}

/// A ground-truth triple with its observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub alpha: Vec<f64>,
    pub x: Image,
    pub sigma: f64,
    pub h: Kernel,
    pub eps: Image,
    pub y: Image,
}

/// Draw one instance: independent alpha, sigma and noise, assembled through
/// the forward model `y = h * x + eps`.
pub fn generate_instance(
    signal: &SignalPrior,
    kernel: &KernelPrior,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> ProblemInstance {
    let alpha = sample_alpha(signal, rng);
    let x = signal.dict.synthesize(&alpha).expect("alpha has K entries");
    let sigma = sample_sigma(kernel, rng);
    let h = gaussian_kernel(sigma, kernel.d).expect("guarded sigma");
    let eps = sample_noise(noise, signal.dict.side(), rng);
    let blurred = conv2_kernel(&x, &h).expect("d <= n by construction");
    let y = Image::from_raw(
        x.side(),
        blurred
            .as_slice()
            .iter()
            .zip(eps.as_slice())
            .map(|(a, b)| a + b)
            .collect(),
    );
    ProblemInstance { alpha, x, sigma, h, eps, y }
}

/// A seeded collection of instances with the priors that generated them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub instances: Vec<ProblemInstance>,
    pub signal: SignalPrior,
    pub kernel: KernelPrior,
    pub noise: NoiseModel,
    pub base_seed: u64,
}

/// Stream purposes for counter-based seeding; each (purpose, indices)
/// combination owns an independent ChaCha stream.
#[derive(Debug, Clone, Copy)]
pub enum StreamPurpose {
    DatasetInstance { index: u64 },
    EvalInstance { index: u64 },
    TrainInstance { size_index: u64, run: u64, index: u64 },
    SolverInit { instance: u64 },
}

/// Independent random stream for one work unit: same key, same stream,
/// regardless of generation order or thread count.
pub fn stream_rng(base_seed: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let stream = match purpose {
        StreamPurpose::DatasetInstance { index } => (1u64 << 60) | index,
        StreamPurpose::EvalInstance { index } => (2u64 << 60) | index,
        StreamPurpose::TrainInstance { size_index, run, index } => {
            (3u64 << 60) | (size_index << 52) | (run << 40) | index
        }
        StreamPurpose::SolverInit { instance } => (4u64 << 60) | instance,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

/// Generate `count` instances; instance `i` comes from the stream keyed by
/// `(base_seed, i)`, so the result is identical no matter how generation is
/// scheduled.
pub fn generate_dataset(
    signal: &SignalPrior,
    kernel: &KernelPrior,
    noise: &NoiseModel,
    count: usize,
    base_seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(invalid("dataset must contain at least one instance"));
    }
    let instances: Vec<ProblemInstance> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(base_seed, StreamPurpose::DatasetInstance { index: i as u64 });
            generate_instance(signal, kernel, noise, &mut rng)
        })
        .collect();
    Ok(Dataset {
        instances,
        signal: signal.clone(),
        kernel: kernel.clone(),
        noise: noise.clone(),
        base_seed,
    })
}
