//! Small dense complex kernels shared by the detectors.
//!
//! Matrices are nalgebra column-major `DMatrix<Complex64>`; the hot loops
//! work directly on column slices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `xᴴ y` for equal-length slices.
#[inline]
pub fn dotc(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    Complex64::new(re, im)
}

/// Real part of `xᴴ y`, for quadratic forms known to be real.
#[inline]
pub fn dotc_re(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

#[inline]
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of the Hermitian form `xᴴ M x`, with a debug check that the
/// imaginary residue is negligible.
pub fn hermitian_form(m: &CMatrix, x: &[Complex64]) -> f64 {
    let n = x.len();
    debug_assert_eq!(m.nrows(), n);
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, xj) in x.iter().enumerate() {
        let col = &m.as_slice()[j * n..(j + 1) * n];
        acc += dotc(x, col) * xj;
    }
    debug_assert!(
        acc.im.abs() <= 1e-8 * acc.norm().max(f64::MIN_POSITIVE),
        "hermitian form has imaginary residue {acc}"
    );
    acc.re
}

/// `y ← M x` for a square column-major matrix.
pub fn matvec(m: &CMatrix, x: &[Complex64], y: &mut [Complex64]) {
    let n = m.nrows();
    debug_assert_eq!(m.ncols(), x.len());
    debug_assert_eq!(y.len(), n);
    y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for (j, xj) in x.iter().enumerate() {
        let col = &m.as_slice()[j * n..(j + 1) * n];
        for (yi, mij) in y.iter_mut().zip(col) {
            *yi += mij * xj;
        }
    }
}

/// `M ← M − c·v·vᴴ` for a Hermitian `M` and real `c`.
pub fn hermitian_rank_one_sub(m: &mut CMatrix, c: f64, v: &[Complex64]) {
    let n = v.len();
    let data = m.as_mut_slice();
    for (j, vj) in v.iter().enumerate() {
        let s = vj.conj() * c;
        let col = &mut data[j * n..(j + 1) * n];
        for (mij, vi) in col.iter_mut().zip(v) {
            *mij -= vi * s;
        }
    }
}

/// Draw one circularly symmetric complex Gaussian sample of the given variance.
#[inline]
pub fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `rows × cols` matrix with i.i.d. CN(0, variance) entries, drawn column by column.
pub fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMatrix {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| cn(rng, variance)).collect();
    CMatrix::from_vec(rows, cols, data)
}

/// Inverse of a Hermitian positive-definite matrix by Cholesky.
pub fn hpd_inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().cholesky().map(|c| c.inverse())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}
