//! Orthonormal 2D DCT-II dictionary: atom construction, random atom
//! selection, and the synthesis/analysis pair used throughout the model.
//!
//! An atom for frequency pair `(p, q)` is the separable basis image
//! `atom(i, j) = c_p(i) * c_q(j)` with `c_p(i) = w_p cos(pi (2i+1) p / 2n)`
//! and `w_0 = sqrt(1/n)`, `w_p = sqrt(2/n)` otherwise. The atoms form an
//! orthonormal family, so analysis is the exact adjoint of synthesis.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::image::Image;

/// One row of the orthonormal DCT-II matrix.
#[inline]
fn dct_row(p: usize, n: usize, out: &mut [f64]) {
    let w = if p == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    for (i, v) in out.iter_mut().enumerate() {
        *v = w * (PI * (2 * i + 1) as f64 * p as f64 / (2.0 * n as f64)).cos();
    }
}

/// Orthonormal 2D DCT-II basis image for frequency pair `(p, q)`.
pub fn dct2_atom(p: usize, q: usize, n: usize) -> Result<Image> {
    if n == 0 {
        return Err(invalid("image side must be >= 1"));
    }
    if p >= n || q >= n {
        return Err(invalid(format!("frequency index ({p},{q}) out of range for side {n}")));
    }
    let mut row_p = vec![0.0; n];
    let mut row_q = vec![0.0; n];
    dct_row(p, n, &mut row_p);
    dct_row(q, n, &mut row_q);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = row_p[i] * row_q[j];
        }
    }
    Ok(Image::from_raw(n, data))
}

/// A fixed set of `K` distinct DCT atoms together with the known location
/// vector of the coefficient prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    n: usize,
    atom_indices: Vec<(usize, usize)>,
    mu_alpha: Vec<f64>,
    /// Orthonormal DCT-II matrix, row-major `n x n`; row p holds c_p.
    dct: Vec<f64>,
}

impl Dictionary {
    /// Assemble a dictionary from explicit atom indices and location vector,
    /// e.g. when reloading from disk.
    pub fn from_parts(n: usize, atom_indices: Vec<(usize, usize)>, mu_alpha: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("image side must be >= 1"));
        }
        if atom_indices.len() != mu_alpha.len() {
            return Err(invalid("atom index and mu_alpha lengths differ"));
        }
        if atom_indices.len() > n * n {
            return Err(invalid(format!(
                "atom count {} exceeds n^2 = {}",
                atom_indices.len(),
                n * n
            )));
        }
        let mut seen = vec![false; n * n];
        for &(p, q) in &atom_indices {
            if p >= n || q >= n {
                return Err(invalid(format!("frequency index ({p},{q}) out of range for side {n}")));
            }
            if seen[p * n + q] {
                return Err(invalid(format!("duplicate atom index ({p},{q})")));
            }
            seen[p * n + q] = true;
        }
        if !mu_alpha.iter().all(|&m| m == 0.5 || m == -0.5) {
            return Err(invalid("mu_alpha entries must be +1/2 or -1/2"));
        }
        let mut dct = vec![0.0; n * n];
        for p in 0..n {
            dct_row(p, n, &mut dct[p * n..(p + 1) * n]);
        }
        Ok(Self { n, atom_indices, mu_alpha, dct })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn atom_count(&self) -> usize {
        self.atom_indices.len()
    }

    #[inline]
    pub fn atom_indices(&self) -> &[(usize, usize)] {
        &self.atom_indices
    }

    #[inline]
    pub fn mu_alpha(&self) -> &[f64] {
        &self.mu_alpha
    }

    /// The k-th atom as an image.
    pub fn atom(&self, k: usize) -> Image {
        let (p, q) = self.atom_indices[k];
        dct2_atom(p, q, self.n).expect("stored indices are in range")
    }

    /// Mean signal of the coefficient prior located at `mu_alpha`.
    pub fn mean_image(&self) -> Image {
        self.synthesize(&self.mu_alpha).expect("mu_alpha has K entries")
    }

    /// Linear combination of atoms with the given coefficients.
    ///
    /// Implemented by scattering coefficients onto the frequency grid and
    /// applying the separable inverse transform; identical (to roundoff) to
    /// summing `alpha_k * atom_k`.
    pub fn synthesize(&self, alpha: &[f64]) -> Result<Image> {
        if alpha.len() != self.atom_count() {
            return Err(invalid(format!(
                "coefficient length {} does not match atom count {}",
                alpha.len(),
                self.atom_count()
            )));
        }
        let n = self.n;
        let mut freq = vec![0.0; n * n];
        for (k, &(p, q)) in self.atom_indices.iter().enumerate() {
            freq[p * n + q] = alpha[k];
        }
        // x = C^T F C via two small matrix products.
        let tmp = matmul_at_b(&self.dct, &freq, n); // C^T F
        let data = matmul_a_b(&tmp, &self.dct, n); // (C^T F) C
        Ok(Image::from_raw(n, data))
    }

    /// Inner products of the image with every atom; the adjoint of
    /// [`Dictionary::synthesize`].
    pub fn analyze(&self, x: &Image) -> Result<Vec<f64>> {
        if x.side() != self.n {
            return Err(invalid(format!(
                "image side {} does not match dictionary side {}",
                x.side(),
                self.n
            )));
        }
        let n = self.n;
        // F = C X C^T
        let tmp = matmul_a_b(&self.dct, x.as_slice(), n); // C X
        let freq = matmul_a_bt(&tmp, &self.dct, n); // (C X) C^T
        Ok(self
            .atom_indices
            .iter()
            .map(|&(p, q)| freq[p * n + q])
            .collect())
    }
}

// C^T * B for square row-major n x n.
fn matmul_at_b(c: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        let row_c = &c[k * n..(k + 1) * n];
        let row_b = &b[k * n..(k + 1) * n];
        for i in 0..n {
            let cki = row_c[i];
            if cki == 0.0 {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                out_row[j] += cki * row_b[j];
            }
        }
    }
    out
}

// A * B for square row-major n x n.
fn matmul_a_b(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row_a = &a[i * n..(i + 1) * n];
        let out_row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = row_a[k];
            if aik == 0.0 {
                continue;
            }
            let row_b = &b[k * n..(k + 1) * n];
            for j in 0..n {
                out_row[j] += aik * row_b[j];
            }
        }
    }
    out
}

// A * B^T for square row-major n x n.
fn matmul_a_bt(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row_a = &a[i * n..(i + 1) * n];
        for j in 0..n {
            let row_b = &b[j * n..(j + 1) * n];
            let mut s = 0.0;
            for k in 0..n {
                s += row_a[k] * row_b[k];
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// Select `K` distinct frequency pairs uniformly without replacement and
/// draw the location vector entries as fair picks from `{+1/2, -1/2}`.
/// Deterministic given the seed.
pub fn make_dictionary(n: usize, k: usize, seed: u64) -> Result<Dictionary> {
    if n == 0 {
        return Err(invalid("image side must be >= 1"));
    }
    if k > n * n {
        return Err(invalid(format!("atom count {k} exceeds n^2 = {}", n * n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<(usize, usize)> = (0..n * n).map(|t| (t / n, t % n)).collect();
    all.shuffle(&mut rng);
    all.truncate(k);
    let mu_alpha: Vec<f64> = (0..k)
        .map(|_| if rng.gen::<bool>() { 0.5 } else { -0.5 })
        .collect();
    Dictionary::from_parts(n, all, mu_alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inner(a: &Image, b: &Image) -> f64 {
        a.dot(b)
    }

    #[test]
    fn dc_atom_is_constant_one_over_n() {
        for n in [1usize, 3, 4, 8] {
            let a = dct2_atom(0, 0, n).unwrap();
            for &v in a.as_slice() {
                assert!((v - 1.0 / n as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn atoms_have_unit_norm() {
        for (p, q, n) in [(0, 0, 5), (1, 0, 4), (3, 2, 7), (7, 7, 8)] {
            let a = dct2_atom(p, q, n).unwrap();
            assert!((a.norm_sq().sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn atom_1_0_varies_over_rows_and_gram_is_identity() {
        let n = 4;
        let a = dct2_atom(1, 0, n).unwrap();
        let c = (2.0 / n as f64).sqrt() * (1.0 / n as f64).sqrt();
        for i in 0..n {
            let expected = c * (PI * (2 * i + 1) as f64 / 8.0).cos();
            for j in 0..n {
                assert!((a.get(i, j) - expected).abs() < 1e-14, "constant over columns");
            }
        }
        // Brute-force Gram matrix of all 16 atoms.
        let atoms: Vec<Image> = (0..n * n)
            .map(|t| dct2_atom(t / n, t % n, n).unwrap())
            .collect();
        for (i, ai) in atoms.iter().enumerate() {
            for (j, aj) in atoms.iter().enumerate() {
                let g = inner(ai, aj);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn atom_index_out_of_range_errors() {
        assert!(dct2_atom(4, 0, 4).is_err());
        assert!(dct2_atom(0, 9, 4).is_err());
    }

    #[test]
    fn dictionary_selects_distinct_reproducible_indices() {
        let d1 = make_dictionary(32, 512, 99).unwrap();
        let d2 = make_dictionary(32, 512, 99).unwrap();
        assert_eq!(d1.atom_indices(), d2.atom_indices());
        assert_eq!(d1.mu_alpha(), d2.mu_alpha());
        let mut seen = std::collections::HashSet::new();
        for &ix in d1.atom_indices() {
            assert!(seen.insert(ix), "duplicate atom index");
        }
        assert_eq!(d1.atom_count(), 512);
    }

    #[test]
    fn dictionary_exhaustive_when_k_equals_n_squared() {
        let d = make_dictionary(2, 4, 5).unwrap();
        let mut ix: Vec<_> = d.atom_indices().to_vec();
        ix.sort_unstable();
        assert_eq!(ix, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert!(make_dictionary(2, 5, 5).is_err());
    }

    #[test]
    fn different_seeds_give_different_sets() {
        let d1 = make_dictionary(16, 64, 1).unwrap();
        let d2 = make_dictionary(16, 64, 2).unwrap();
        assert_ne!(d1.atom_indices(), d2.atom_indices());
    }

    #[test]
    fn synthesize_is_linear_and_reproduces_atoms() {
        let d = make_dictionary(8, 12, 7).unwrap();
        let zero = d.synthesize(&vec![0.0; 12]).unwrap();
        assert_eq!(zero.norm_sq(), 0.0);
        for k in [0usize, 5, 11] {
            let mut e = vec![0.0; 12];
            e[k] = 1.0;
            let img = d.synthesize(&e).unwrap();
            let atom = d.atom(k);
            for (a, b) in img.as_slice().iter().zip(atom.as_slice()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        assert!(d.synthesize(&vec![0.0; 11]).is_err());
    }

    #[test]
    fn analyze_synthesize_round_trip() {
        let d = make_dictionary(8, 20, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alpha: Vec<f64> = (0..20).map(|_| rng.gen::<f64>() - 0.5).collect();
        let x = d.synthesize(&alpha).unwrap();
        let back = d.analyze(&x).unwrap();
        for (a, b) in alpha.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn analyze_is_adjoint_of_synthesize() {
        let d = make_dictionary(6, 9, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() - 0.5).collect();
        let x = Image::new(6, (0..36).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap();
        let lhs: f64 = d.synthesize(&a).unwrap().dot(&x);
        let rhs: f64 = d
            .analyze(&x)
            .unwrap()
            .iter()
            .zip(&a)
            .map(|(u, v)| u * v)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10);
        assert!(d.analyze(&Image::zeros(5)).is_err());
    }

    #[test]
    fn analyze_of_atom_is_basis_vector() {
        let d = make_dictionary(8, 16, 21).unwrap();
        let coeffs = d.analyze(&d.atom(3)).unwrap();
        for (k, c) in coeffs.iter().enumerate() {
            let expect = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn analyze_of_unselected_atom_is_zero() {
        // Dictionary over a strict subset of frequencies; any left-out atom
        // is orthogonal to all selected ones.
        let n = 4;
        let d = Dictionary::from_parts(
            n,
            vec![(0, 0), (1, 2), (3, 3)],
            vec![0.5, -0.5, 0.5],
        )
        .unwrap();
        let left_out = dct2_atom(2, 1, n).unwrap();
        let coeffs = d.analyze(&left_out).unwrap();
        for c in coeffs {
            assert!(c.abs() < 1e-13);
        }
    }
}
