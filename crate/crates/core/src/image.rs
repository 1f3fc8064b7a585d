//! Square-grid value types for the deconvolution model: images on the
//! observation domain, blur kernels on the simplex, and unconstrained
//! kernel-support grids.

use crate::error::{invalid, Result};

/// Tolerance used when validating that kernel weights sum to one.
pub const KERNEL_SUM_TOL: f64 = 1e-12;

/// An `n x n` real-valued grid, row-major. Used for signals, observations
/// and noise realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("image side must be >= 1"));
        }
        if data.len() != n * n {
            return Err(invalid(format!(
                "image data length {} does not match side {n}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(invalid("image entries must be finite"));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Constant image with every pixel equal to `c`.
    pub fn constant(n: usize, c: f64) -> Self {
        Self { n, data: vec![c; n * n] }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n + col] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Unchecked constructor for internal hot paths; callers guarantee the
    /// length invariant.
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// A `d x d` blur kernel: nonnegative weights summing to one, odd side so
/// the center offset (0,0) is well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    d: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || d % 2 == 0 {
            return Err(invalid(format!("kernel side must be odd, got {d}")));
        }
        if data.len() != d * d {
            return Err(invalid(format!(
                "kernel data length {} does not match side {d}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(invalid("kernel entries must be finite and nonnegative"));
        }
        let sum: f64 = data.iter().sum();
        if (sum - 1.0).abs() > KERNEL_SUM_TOL {
            return Err(invalid(format!(
                "kernel entries must sum to 1 within {KERNEL_SUM_TOL}, got {sum}"
            )));
        }
        Ok(Self { d, data })
    }

    /// Dirac kernel: all mass at the center offset (0,0).
    pub fn delta(d: usize) -> Result<Self> {
        if d == 0 || d % 2 == 0 {
            return Err(invalid(format!("kernel side must be odd, got {d}")));
        }
        let mut data = vec![0.0; d * d];
        let c = d / 2;
        data[c * d + c] = 1.0;
        Ok(Self { d, data })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entry at offset `(i, j)`, each in `{-(d-1)/2, ..., (d-1)/2}`.
    #[inline]
    pub fn at_offset(&self, i: isize, j: isize) -> f64 {
        let half = (self.d / 2) as isize;
        debug_assert!(i.abs() <= half && j.abs() <= half);
        let r = (i + half) as usize;
        let c = (j + half) as usize;
        self.data[r * self.d + c]
    }

    pub fn grid(&self) -> KernelGrid {
        KernelGrid { d: self.d, data: self.data.clone() }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// An unconstrained `d x d` grid on the kernel support: gradients,
/// derivative fields and raw LMMSE kernel estimates live here because they
/// generally leave the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    d: usize,
    data: Vec<f64>,
}

impl KernelGrid {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || d % 2 == 0 {
            return Err(invalid(format!("kernel side must be odd, got {d}")));
        }
        if data.len() != d * d {
            return Err(invalid(format!(
                "grid data length {} does not match side {d}",
                data.len()
            )));
        }
        Ok(Self { d, data })
    }

    pub fn zeros(d: usize) -> Self {
        Self { d, data: vec![0.0; d * d] }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn from_raw(d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), d * d);
        Self { d, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_shapes() {
        assert!(Image::new(0, vec![]).is_err());
        assert!(Image::new(2, vec![0.0; 3]).is_err());
        assert!(Image::new(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Image::new(2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn kernel_requires_simplex_membership() {
        assert!(Kernel::new(3, vec![1.0 / 9.0; 9]).is_ok());
        assert!(Kernel::new(2, vec![0.25; 4]).is_err(), "even side");
        assert!(Kernel::new(3, vec![0.2; 9]).is_err(), "sum != 1");
        let mut v = vec![0.0; 9];
        v[0] = 1.5;
        v[1] = -0.5;
        assert!(Kernel::new(3, v).is_err(), "negative entry");
    }

    #[test]
    fn delta_kernel_centers_mass() {
        let k = Kernel::delta(5).unwrap();
        assert_eq!(k.at_offset(0, 0), 1.0);
        assert_eq!(k.at_offset(1, -2), 0.0);
        assert_eq!(k.as_slice().iter().sum::<f64>(), 1.0);
    }
}
