//! Dense brute-force reference evaluators.
//!
//! Everything here forms `Σ` explicitly and factorizes it in `O(L³)`; none of
//! the rank-one shortcuts used by the detectors appear. Only compiled with the
//! `oracle` feature, which the test suites enable.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{PilotMatrix, SampleCovariance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlfEvaluation {
    pub value: f64,
    pub trace_term: f64,
    pub logdet_term: f64,
}

/// `Σ = Σₙ γₙ aₙaₙᴴ + σ²I`, summed atom by atom.
pub fn model_covariance(pilots: &PilotMatrix, gamma: &[f64], noise_var: f64) -> Result<CMatrix> {
    if gamma.len() != pilots.n_devices() {
        return Err(invalid("gamma length does not match N"));
    }
    if gamma.iter().any(|&g| !(g >= 0.0)) {
        return Err(invalid("gamma must be entrywise non-negative"));
    }
    if !(noise_var > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    let l = pilots.pilot_len();
    let mut sigma = CMatrix::identity(l, l) * Complex64::new(noise_var, 0.0);
    for (n, &g) in gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let a = pilots.column(n);
        for j in 0..l {
            for i in 0..l {
                sigma[(i, j)] += a[i] * a[j].conj() * g;
            }
        }
    }
    Ok(sigma)
}

fn cholesky(sigma: &CMatrix) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    sigma.clone().cholesky().ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))
}

/// `tr(Σ⁻¹Ŝ) + log|Σ|` via Cholesky.
pub fn llf_of_covariance(sigma: &CMatrix, s_hat: &SampleCovariance) -> Result<LlfEvaluation> {
    let chol = cholesky(sigma)?;
    let logdet_term = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
    let x = chol.solve(s_hat.matrix());
    let trace_term = (0..x.nrows()).map(|i| x[(i, i)].re).sum::<f64>();
    Ok(LlfEvaluation { value: trace_term + logdet_term, trace_term, logdet_term })
}

/// Negative log-likelihood of the covariance model at `gamma`.
pub fn negative_llf(
    gamma: &[f64],
    pilots: &PilotMatrix,
    noise_var: f64,
    s_hat: &SampleCovariance,
) -> Result<LlfEvaluation> {
    llf_of_covariance(&model_covariance(pilots, gamma, noise_var)?, s_hat)
}

/// Same objective through a Hermitian eigendecomposition instead of Cholesky.
pub fn negative_llf_eig(
    gamma: &[f64],
    pilots: &PilotMatrix,
    noise_var: f64,
    s_hat: &SampleCovariance,
) -> Result<LlfEvaluation> {
    let sigma = model_covariance(pilots, gamma, noise_var)?;
    let eig = SymmetricEigen::new(sigma);
    if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Numerical("covariance has a non-positive eigenvalue".into()));
    }
    let logdet_term = eig.eigenvalues.iter().map(|e| e.ln()).sum();
    let mut trace_term = 0.0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        trace_term += (u.adjoint() * s_hat.matrix() * u)[(0, 0)].re / lambda;
    }
    Ok(LlfEvaluation { value: trace_term + logdet_term, trace_term, logdet_term })
}

fn column(a: &[Complex64]) -> CVector {
    CVector::from_column_slice(a)
}

fn with_atom(sigma_minus_i: &CMatrix, a: &CVector, gamma: f64) -> CMatrix {
    sigma_minus_i + a * a.adjoint() * Complex64::new(gamma, 0.0)
}

/// `ℓᵢ(γ) = tr((Σ₋ᵢ + γaaᴴ)⁻¹Ŝ) + log|Σ₋ᵢ + γaaᴴ|`, evaluated densely.
pub fn conditional_llf(
    gamma: f64,
    sigma_minus_i: &CMatrix,
    a_i: &[Complex64],
    s_hat: &SampleCovariance,
) -> Result<f64> {
    let a = column(a_i);
    Ok(llf_of_covariance(&with_atom(sigma_minus_i, &a, gamma), s_hat)?.value)
}

/// `ℓᵢ(γ) − ℓᵢ(0)` without cancellation between the two large values.
///
/// Uses `Σ(γ)⁻¹ − Σ₋ᵢ⁻¹ = −γ·Σ(γ)⁻¹aaᴴΣ₋ᵢ⁻¹` for the trace part and a dense
/// LU determinant of `Σ₋ᵢ⁻¹Σ(γ)` for the log-determinant part.
pub fn conditional_llf_change(
    gamma: f64,
    sigma_minus_i: &CMatrix,
    a_i: &[Complex64],
    s_hat: &SampleCovariance,
) -> Result<f64> {
    let a = column(a_i);
    let sigma = with_atom(sigma_minus_i, &a, gamma);
    let base = cholesky(sigma_minus_i)?;
    let full = cholesky(&sigma)?;
    // tr(ΔΣ⁻¹ Ŝ) = −γ · aᴴ Σ₋ᵢ⁻¹ Ŝ Σ(γ)⁻¹ a
    let u = base.solve(&a);
    let v = full.solve(&a);
    let trace_change = -gamma * (u.adjoint() * s_hat.matrix() * v)[(0, 0)].re;
    let ratio = base.solve(&sigma);
    let det = ratio.lu().determinant();
    Ok(trace_change + det.re.ln())
}

/// The two quadratic forms `q = aᴴΣ₋ᵢ⁻¹a` and `p = aᴴΣ₋ᵢ⁻¹ŜΣ₋ᵢ⁻¹a`, by dense solve.
pub fn quadratic_forms(sigma_minus_i: &CMatrix, a_i: &[Complex64], s_hat: &SampleCovariance) -> Result<(f64, f64)> {
    let a = column(a_i);
    let u = cholesky(sigma_minus_i)?.solve(&a);
    let q = (a.adjoint() * &u)[(0, 0)].re;
    let p = (u.adjoint() * s_hat.matrix() * &u)[(0, 0)].re;
    Ok((q, p))
}

/// First and second derivatives of `ℓᵢ` at `gamma` from the closed forms
/// `ℓ′ = q/(1+γq) − p/(1+γq)²` and `ℓ″ = −q²/(1+γq)² + 2qp/(1+γq)³`.
pub fn derivative_checks(
    sigma_minus_i: &CMatrix,
    a_i: &[Complex64],
    s_hat: &SampleCovariance,
    gamma: f64,
) -> Result<(f64, f64)> {
    let (q, p) = quadratic_forms(sigma_minus_i, a_i, s_hat)?;
    let d = 1.0 + gamma * q;
    let first = q / d - p / (d * d);
    let second = -(q * q) / (d * d) + 2.0 * q * p / (d * d * d);
    Ok((first, second))
}

/// Central finite differences of [`conditional_llf`] with step `1e-5·(1+γ)`.
pub fn finite_difference_derivatives(
    sigma_minus_i: &CMatrix,
    a_i: &[Complex64],
    s_hat: &SampleCovariance,
    gamma: f64,
) -> Result<(f64, f64)> {
    let h = 1e-5 * (1.0 + gamma);
    let lo = (gamma - h).max(0.0);
    let hi = lo + 2.0 * h;
    let mid = lo + h;
    let f = |g| conditional_llf_change(g, sigma_minus_i, a_i, s_hat);
    let (fl, fm, fh) = (f(lo)?, f(mid)?, f(hi)?);
    Ok(((fh - fl) / (2.0 * h), (fh - 2.0 * fm + fl) / (h * h)))
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const BRACKET_CAP: f64 = 1e12;

/// Minimizes `ℓᵢ` over `[0, ∞)` by golden-section search.
///
/// The bracket `[0, gamma_upper]` is doubled until the derivative at the upper
/// end is non-negative. Returns an error if the objective sampled on the final
/// bracket is not unimodal beyond rounding noise.
pub fn golden_minimize_gamma(
    sigma_minus_i: &CMatrix,
    a_i: &[Complex64],
    s_hat: &SampleCovariance,
    gamma_upper: f64,
) -> Result<f64> {
    if !(gamma_upper > 0.0) {
        return Err(invalid("gamma_upper must be positive"));
    }
    let slope = |g: f64| derivative_checks(sigma_minus_i, a_i, s_hat, g).map(|d| d.0);
    let (q, p) = quadratic_forms(sigma_minus_i, a_i, s_hat)?;
    // ℓ′(0) = q − p; a non-negative slope at the origin pins the minimizer there.
    if q - p >= -1e-13 * (q + p) {
        return Ok(0.0);
    }
    let mut upper = gamma_upper;
    while slope(upper)? < 0.0 {
        upper *= 2.0;
        if upper > BRACKET_CAP {
            return Err(Error::Numerical("no sign change of the derivative below the bracket cap".into()));
        }
    }

    let f = |g: f64| conditional_llf_change(g, sigma_minus_i, a_i, s_hat);
    check_unimodal(&f, upper)?;

    let tol = (1e-9 * (1.0 + upper)).min(1e-13 * upper);
    let (mut lo, mut hi) = (0.0, upper);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok((0.5 * (lo + hi)).max(0.0))
}

fn check_unimodal<F: Fn(f64) -> Result<f64>>(f: &F, upper: f64) -> Result<()> {
    const SAMPLES: usize = 65;
    let values: Vec<f64> = (0..SAMPLES).map(|k| f(upper * k as f64 / (SAMPLES - 1) as f64)).collect::<Result<_>>()?;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let noise = 1e-10 * scale;
    let mut rising = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d > noise {
            rising = true;
        } else if rising && d < -noise {
            return Err(Error::Numerical("conditional objective is not unimodal on the bracket".into()));
        }
    }
    Ok(())
}

/// `B = Σ⁻¹A` by dense Cholesky solve.
pub fn direct_b(pilots: &PilotMatrix, gamma: &[f64], noise_var: f64) -> Result<CMatrix> {
    let sigma = model_covariance(pilots, gamma, noise_var)?;
    Ok(cholesky(&sigma)?.solve(pilots.matrix()))
}
