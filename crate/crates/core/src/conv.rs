//! Circular 2D convolution on the n x n torus, its adjoint (circular
//! correlation), and the embedding/restriction pair that moves blur kernels
//! between their d x d support and the image grid.
//!
//! Convolutions run through a cached 2D FFT; the direct definition is kept
//! by the test suites as an independent oracle.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::image::{Image, Kernel, KernelGrid};

/// Row/column FFT plans for one grid side, plus scratch.
pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Self { n, fwd, inv }
    }

    fn transform_rows(&self, buf: &mut [Complex<f64>], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        for row in buf.chunks_exact_mut(self.n) {
            plan.process(row);
        }
    }

    fn transpose(&self, buf: &[Complex<f64>], out: &mut [Complex<f64>]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = buf[i * n + j];
            }
        }
    }

    fn transform2(&self, buf: &mut Vec<Complex<f64>>, forward: bool) {
        let mut t = vec![Complex::default(); buf.len()];
        self.transform_rows(buf, forward);
        self.transpose(buf, &mut t);
        self.transform_rows(&mut t, forward);
        self.transpose(&t, buf);
    }

    /// Unnormalized 2D DFT of a real image.
    pub(crate) fn forward(&self, real: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = real.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform2(&mut buf, true);
        buf
    }

    /// Inverse 2D DFT, returning the real part scaled by 1/n^2.
    pub(crate) fn inverse_real(&self, freq: &[Complex<f64>]) -> Vec<f64> {
        let mut buf = freq.to_vec();
        self.transform2(&mut buf, false);
        let scale = 1.0 / (self.n * self.n) as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<usize, Rc<Fft2>>> = RefCell::new(HashMap::new());
}

pub(crate) fn plans_for(n: usize) -> Rc<Fft2> {
    PLAN_CACHE.with(|c| {
        Rc::clone(
            c.borrow_mut()
                .entry(n)
                .or_insert_with(|| Rc::new(Fft2::new(n))),
        )
    })
}

/// Unnormalized 2D DFT of an embedded filter, reusable across many
/// convolutions with the same kernel.
pub(crate) fn filter_spectrum(plans: &Fft2, filter: &Image) -> Vec<Complex<f64>> {
    plans.forward(filter.as_slice())
}

/// Circular convolution of a flat n^2 signal with a precomputed filter
/// spectrum.
pub(crate) fn conv_with_spectrum(plans: &Fft2, spec: &[Complex<f64>], src: &[f64]) -> Vec<f64> {
    let sf = plans.forward(src);
    let prod: Vec<Complex<f64>> = sf.iter().zip(spec).map(|(a, b)| a * b).collect();
    plans.inverse_real(&prod)
}

/// Circular correlation (adjoint of convolution) against a precomputed
/// filter spectrum.
pub(crate) fn corr_with_spectrum(plans: &Fft2, spec: &[Complex<f64>], src: &[f64]) -> Vec<f64> {
    let sf = plans.forward(src);
    let prod: Vec<Complex<f64>> = sf.iter().zip(spec).map(|(a, b)| a * b.conj()).collect();
    plans.inverse_real(&prod)
}

/// Place a d x d kernel on the n x n torus: the entry at offset
/// `(i, j) in {-(d-1)/2, ..., (d-1)/2}^2` lands at pixel
/// `(i mod n, j mod n)`; the sum of entries is preserved.
pub fn embed_kernel(h: &Kernel, n: usize) -> Result<Image> {
    embed_grid_impl(h.side(), h.as_slice(), n)
}

/// Same embedding for an unconstrained kernel-support grid.
pub fn embed_grid(g: &KernelGrid, n: usize) -> Result<Image> {
    embed_grid_impl(g.side(), g.as_slice(), n)
}

fn embed_grid_impl(d: usize, data: &[f64], n: usize) -> Result<Image> {
    if d > n {
        return Err(invalid(format!("kernel side {d} exceeds image side {n}")));
    }
    let half = (d / 2) as isize;
    let n_i = n as isize;
    let mut out = vec![0.0; n * n];
    for r in 0..d {
        let i = r as isize - half;
        let gi = i.rem_euclid(n_i) as usize;
        for c in 0..d {
            let j = c as isize - half;
            let gj = j.rem_euclid(n_i) as usize;
            out[gi * n + gj] = data[r * d + c];
        }
    }
    Ok(Image::from_raw(n, out))
}

/// Adjoint of [`embed_kernel`]: read back the d^2 wrapped positions of an
/// n x n image into a kernel-support grid.
pub fn restrict_to_kernel(g: &Image, d: usize) -> Result<KernelGrid> {
    let n = g.side();
    if d > n {
        return Err(invalid(format!("kernel side {d} exceeds image side {n}")));
    }
    if d % 2 == 0 {
        return Err(invalid(format!("kernel side must be odd, got {d}")));
    }
    let half = (d / 2) as isize;
    let n_i = n as isize;
    let mut out = vec![0.0; d * d];
    for r in 0..d {
        let i = r as isize - half;
        let gi = i.rem_euclid(n_i) as usize;
        for c in 0..d {
            let j = c as isize - half;
            let gj = j.rem_euclid(n_i) as usize;
            out[r * d + c] = g.get(gi, gj);
        }
    }
    Ok(KernelGrid::from_raw(d, out))
}

/// Circular 2D convolution of two images of the same side.
pub fn conv2_circ(x: &Image, filter: &Image) -> Result<Image> {
    if x.side() != filter.side() {
        return Err(invalid(format!(
            "size mismatch: {} vs {}",
            x.side(),
            filter.side()
        )));
    }
    let plans = plans_for(x.side());
    let xf = plans.forward(x.as_slice());
    let ff = plans.forward(filter.as_slice());
    let prod: Vec<Complex<f64>> = xf.iter().zip(&ff).map(|(a, b)| a * b).collect();
    Ok(Image::from_raw(x.side(), plans.inverse_real(&prod)))
}

/// Convolve an image with a d x d kernel (embedded on the image torus).
pub fn conv2_kernel(x: &Image, h: &Kernel) -> Result<Image> {
    let emb = embed_kernel(h, x.side())?;
    conv2_circ(x, &emb)
}

/// Adjoint of `x -> conv2_circ(x, filter)`: circular correlation,
/// `out(u) = sum_s filter(s) r(u + s)` on the torus.
pub fn conv2_adj(filter: &Image, r: &Image) -> Result<Image> {
    if r.side() != filter.side() {
        return Err(invalid(format!(
            "size mismatch: {} vs {}",
            r.side(),
            filter.side()
        )));
    }
    let plans = plans_for(r.side());
    let rf = plans.forward(r.as_slice());
    let ff = plans.forward(filter.as_slice());
    let prod: Vec<Complex<f64>> = rf.iter().zip(&ff).map(|(a, b)| a * b.conj()).collect();
    Ok(Image::from_raw(r.side(), plans.inverse_real(&prod)))
}

/// Adjoint convolution against a d x d kernel.
pub fn conv2_adj_kernel(h: &Kernel, r: &Image) -> Result<Image> {
    let emb = embed_kernel(h, r.side())?;
    conv2_adj(&emb, r)
}
