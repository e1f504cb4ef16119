//! Reference detectors: coordinate-wise optimization (CWO) of the same
//! covariance likelihood, simultaneous OMP, and multiple-measurement-vector
//! sparse Bayesian learning.

use std::time::Instant;

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detector::DetectionResult;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dotc_re, hermitian_form, hermitian_rank_one_sub, matvec, norm_sqr, trace_re, CMatrix};
use crate::model::{PilotMatrix, SampleCovariance};

/// Indices of the `k` largest entries, largest first; ties go to the smaller index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var > 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("noise variance must be positive, got {noise_var}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwoConfig {
    /// Full passes over all coordinates, each in a fresh random order.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CwoConfig {
    fn default() -> Self {
        Self { epochs: 15, seed: 0 }
    }
}

/// Exact coordinate descent on `tr(Σ⁻¹Ŝ) + log|Σ|` over `γ ≥ 0`, tracking `Σ⁻¹`
/// with signed rank-one updates.
#[derive(Debug, Clone)]
pub struct CwoSolver<'a> {
    pilots: &'a PilotMatrix,
    s_hat: &'a SampleCovariance,
    sigma_inv: CMatrix,
    gamma: Vec<f64>,
    rng: ChaCha8Rng,
    v: Vec<Complex64>,
}

impl<'a> CwoSolver<'a> {
    pub fn new(s_hat: &'a SampleCovariance, pilots: &'a PilotMatrix, noise_var: f64, seed: u64) -> Result<Self> {
        check_noise(noise_var)?;
        let l = pilots.pilot_len();
        if s_hat.dim() != l {
            return Err(invalid("covariance dimension does not match pilot length"));
        }
        Ok(Self {
            pilots,
            s_hat,
            sigma_inv: CMatrix::identity(l, l) * Complex64::new(1.0 / noise_var, 0.0),
            gamma: vec![0.0; pilots.n_devices()],
            rng: ChaCha8Rng::seed_from_u64(seed),
            v: vec![Complex64::default(); l],
        })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn sigma_inv(&self) -> &CMatrix {
        &self.sigma_inv
    }

    /// Minimizes exactly along coordinate `n`; returns the applied increment.
    pub fn step(&mut self, n: usize) -> Result<f64> {
        let a = self.pilots.column(n);
        matvec(&self.sigma_inv, a, &mut self.v);
        let q = dotc_re(a, &self.v);
        let p = hermitian_form(self.s_hat.matrix(), &self.v);
        if q <= crate::detector::DEGENERATE_FLOOR {
            return Ok(0.0);
        }
        let d = ((p - q) / (q * q)).max(-self.gamma[n]);
        if d == 0.0 {
            return Ok(0.0);
        }
        let denom = 1.0 + d * q;
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!("coordinate update denominator {denom} is not positive")));
        }
        self.gamma[n] = (self.gamma[n] + d).max(0.0);
        hermitian_rank_one_sub(&mut self.sigma_inv, d / denom, &self.v);
        Ok(d)
    }

    /// One pass over all coordinates in a fresh random permutation.
    pub fn epoch(&mut self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.pilots.n_devices()).collect();
        order.shuffle(&mut self.rng);
        for n in order {
            self.step(n)?;
        }
        Ok(())
    }
}

/// CWO for a fixed number of epochs, then the `k` largest powers.
pub fn cwo_detect(
    s_hat: &SampleCovariance,
    pilots: &PilotMatrix,
    noise_var: f64,
    cfg: CwoConfig,
    k: usize,
) -> Result<DetectionResult> {
    let start = Instant::now();
    if cfg.epochs == 0 {
        return Err(invalid("CWO needs at least one epoch"));
    }
    if k > pilots.n_devices() {
        return Err(invalid(format!("K = {k} exceeds N = {}", pilots.n_devices())));
    }
    let mut solver = CwoSolver::new(s_hat, pilots, noise_var, cfg.seed)?;
    for _ in 0..cfg.epochs {
        solver.epoch()?;
    }
    Ok(DetectionResult {
        support: top_k(&solver.gamma, k),
        gamma_hat: solver.gamma,
        iterations: cfg.epochs,
        elapsed: start.elapsed(),
    })
}

/// Solves `(A_SᴴA_S) X = A_SᴴY`, falling back to a ridge of `1e-12·trace`
/// when the Gram matrix is numerically singular.
fn least_squares(sub: &CMatrix, y: &CMatrix) -> CMatrix {
    let gram = sub.adjoint() * sub;
    let rhs = sub.adjoint() * y;
    if let Some(c) = Cholesky::new(gram.clone()) {
        return c.solve(&rhs);
    }
    let ridge = 1e-12 * trace_re(&gram).max(f64::MIN_POSITIVE);
    let k = gram.nrows();
    let reg = gram + CMatrix::identity(k, k) * Complex64::new(ridge, 0.0);
    match Cholesky::new(reg.clone()) {
        Some(c) => c.solve(&rhs),
        None => reg.lu().solve(&rhs).unwrap_or_else(|| CMatrix::zeros(k, y.ncols())),
    }
}

/// Simultaneous OMP, also returning the residual Frobenius norm after each selection.
pub fn somp_detect_traced(y: &CMatrix, pilots: &PilotMatrix, k: usize) -> Result<(DetectionResult, Vec<f64>)> {
    let start = Instant::now();
    let (l, n) = (pilots.pilot_len(), pilots.n_devices());
    if y.nrows() != l {
        return Err(invalid("received block row count does not match pilot length"));
    }
    if k > l.min(n) {
        return Err(invalid(format!("SOMP needs K ≤ min(L, N), got K = {k}")));
    }
    let m = y.ncols();
    let norms: Vec<f64> = (0..n).map(|i| norm_sqr(pilots.column(i)).sqrt()).collect();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut residual = y.clone();
    let mut x_s = CMatrix::zeros(0, m);
    let mut trace = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let a = pilots.column(i);
            let corr: f64 =
                (0..m).map(|t| crate::linalg::dotc(a, &residual.as_slice()[t * l..(t + 1) * l]).norm_sqr()).sum();
            let score = corr.sqrt() / norms[i];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (pick, _) = best.ok_or_else(|| Error::State("no atoms left".into()))?;
        taken[pick] = true;
        selected.push(pick);
        let cols: Vec<_> = selected.iter().map(|&s| pilots.matrix().column(s)).collect();
        let sub = CMatrix::from_columns(&cols);
        x_s = least_squares(&sub, y);
        residual = y - &sub * &x_s;
        trace.push(residual.norm());
    }
    let mut gamma_hat = vec![0.0; n];
    for (r, &s) in selected.iter().enumerate() {
        gamma_hat[s] = x_s.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>() / m.max(1) as f64;
    }
    let res = DetectionResult { support: selected, gamma_hat, iterations: k, elapsed: start.elapsed() };
    Ok((res, trace))
}

pub fn somp_detect(y: &CMatrix, pilots: &PilotMatrix, k: usize) -> Result<DetectionResult> {
    somp_detect_traced(y, pilots, k).map(|(r, _)| r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsblConfig {
    pub max_iters: usize,
    /// Stop when `‖γ_new − γ‖₂ / ‖γ‖₂` falls below this.
    pub rel_tol: f64,
    /// Lower bound on every `γₙ`, in units of the noise variance.
    pub gamma_floor: f64,
}

impl Default for MsblConfig {
    fn default() -> Self {
        Self { max_iters: 150, rel_tol: 1e-6, gamma_floor: 1e-12 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MsblDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// `tr(Σ_y⁻¹Ŝ) + log|Σ_y|` at the start of each iteration.
    pub objective: Vec<f64>,
    /// Number of E-steps that needed diagonal jitter to factorize `Σ_y`.
    pub jitter_events: usize,
}

fn factor_with_jitter(mut sigma: CMatrix, jitter_events: &mut usize) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let l = sigma.nrows();
    let jitter = 1e-12 * trace_re(&sigma).max(f64::MIN_POSITIVE);
    for _ in 0..8 {
        if let Some(c) = Cholesky::new(sigma.clone()) {
            return Ok(c);
        }
        *jitter_events += 1;
        for i in 0..l {
            sigma[(i, i)] += jitter;
        }
    }
    Err(Error::Numerical("evidence covariance stayed indefinite after jitter".into()))
}

/// EM iterations of M-SBL with the noise variance held fixed.
pub fn msbl_run(
    y: &CMatrix,
    pilots: &PilotMatrix,
    noise_var: f64,
    cfg: MsblConfig,
) -> Result<(Vec<f64>, MsblDiagnostics)> {
    check_noise(noise_var)?;
    if cfg.max_iters == 0 || !(cfg.rel_tol > 0.0) || !(cfg.gamma_floor > 0.0) {
        return Err(invalid("MSBL needs max_iters ≥ 1, rel_tol > 0 and gamma_floor > 0"));
    }
    let (l, n) = (pilots.pilot_len(), pilots.n_devices());
    if y.nrows() != l {
        return Err(invalid("received block row count does not match pilot length"));
    }
    let m = y.ncols().max(1) as f64;
    let a = pilots.matrix();
    let floor = cfg.gamma_floor * noise_var;
    let power = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / m;
    let dict_energy: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let mut gamma = vec![(power / dict_energy).max(floor); n];
    let mut diag = MsblDiagnostics::default();

    for _ in 0..cfg.max_iters {
        let mut scaled = a.clone();
        for (mut col, &g) in scaled.column_iter_mut().zip(&gamma) {
            col *= Complex64::new(g, 0.0);
        }
        let mut sigma_y = &scaled * a.adjoint();
        for i in 0..l {
            sigma_y[(i, i)] += noise_var;
        }
        let chol = factor_with_jitter(sigma_y, &mut diag.jitter_events)?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
        let z = chol.solve(y);
        let fit: f64 = y.iter().zip(z.iter()).map(|(yv, zv)| (yv.conj() * zv).re).sum::<f64>() / m;
        diag.objective.push(fit + logdet);

        let c = chol.solve(a);
        let mut next = Vec::with_capacity(n);
        for (i, &g) in gamma.iter().enumerate() {
            let ai = pilots.column(i);
            let ci = &c.as_slice()[i * l..(i + 1) * l];
            let row_energy: f64 =
                (0..y.ncols()).map(|t| crate::linalg::dotc(ai, &z.as_slice()[t * l..(t + 1) * l]).norm_sqr()).sum();
            let mean_sq = g * g * row_energy / m;
            let post_var = g - g * g * dotc_re(ai, ci);
            next.push((mean_sq + post_var).max(floor));
        }
        let change: f64 = next.iter().zip(&gamma).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size: f64 = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        gamma = next;
        diag.iterations += 1;
        if change <= cfg.rel_tol * size {
            diag.converged = true;
            break;
        }
    }
    Ok((gamma, diag))
}

pub fn msbl_detect(
    y: &CMatrix,
    pilots: &PilotMatrix,
    noise_var: f64,
    cfg: MsblConfig,
    k: usize,
) -> Result<DetectionResult> {
    let start = Instant::now();
    if k > pilots.n_devices() {
        return Err(invalid(format!("K = {k} exceeds N = {}", pilots.n_devices())));
    }
    let (gamma, diag) = msbl_run(y, pilots, noise_var, cfg)?;
    Ok(DetectionResult {
        support: top_k(&gamma, k),
        gamma_hat: gamma,
        iterations: diag.iterations,
        elapsed: start.elapsed(),
    })
}
