//! Covariance-learning matching pursuit (CL-MP).
//!
//! The detector greedily adds one device at a time to the active set. Each
//! sweep evaluates, for every device not yet selected, the closed-form
//! minimizer of the covariance log-likelihood along that single coordinate
//! and the resulting likelihood decrease. The device with the largest
//! decrease is selected and `B = Σ⁻¹A` is refreshed with a rank-one update,
//! so an iteration costs `O(N·L²)` and no `L × L` inverse is ever formed.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dotc, dotc_re, CMatrix};
use crate::model::{PilotMatrix, SampleCovariance};

/// Atoms with `aᴴΣ⁻¹a` at or below this value get zero power.
pub const DEGENERATE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop after `k_max` selections.
    MaxSelections(usize),
    /// Stop once the best candidate's power is below `tau` (it is not added),
    /// or after `k_cap` selections.
    PowerThreshold { tau: f64, k_cap: usize },
}

impl StoppingRule {
    fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::MaxSelections(0) => Err(invalid("k_max must be at least 1")),
            StoppingRule::PowerThreshold { k_cap: 0, .. } => Err(invalid("k_cap must be at least 1")),
            StoppingRule::PowerThreshold { tau, .. } if !(tau >= 0.0) => {
                Err(invalid(format!("power threshold must be non-negative, got {tau}")))
            }
            _ => Ok(()),
        }
    }

    fn cap(&self) -> usize {
        match *self {
            StoppingRule::MaxSelections(k) => k,
            StoppingRule::PowerThreshold { k_cap, .. } => k_cap,
        }
    }
}

/// Output shared by every detector in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Estimated active devices, in selection order (greedy detectors) or by
    /// decreasing estimated power (thresholding detectors).
    pub support: Vec<usize>,
    /// Estimated effective powers, zero off the support for CL-MP.
    pub gamma_hat: Vec<f64>,
    pub iterations: usize,
    pub elapsed: Duration,
}

impl DetectionResult {
    pub fn support_sorted(&self) -> Vec<usize> {
        let mut s = self.support.clone();
        s.sort_unstable();
        s
    }
}

/// Closed-form power update from the two quadratic forms
/// `ab = aᴴΣ⁻¹a` and `bsb = aᴴΣ⁻¹ŜΣ⁻¹a`.
#[inline]
pub fn gamma_from_forms(ab: f64, bsb: f64) -> f64 {
    if ab <= DEGENERATE_FLOOR {
        return 0.0;
    }
    ((bsb - ab) / (ab * ab)).max(0.0)
}

/// Minimizer over `γ ≥ 0` of the conditional likelihood of atom `a_i` given
/// `b_i = Σ⁻¹a_i`, where `Σ` excludes atom `i`.
pub fn gamma_candidate(s_hat: &SampleCovariance, a_i: &[Complex64], b_i: &[Complex64]) -> Result<f64> {
    let l = s_hat.dim();
    if a_i.len() != l || b_i.len() != l {
        return Err(invalid("atom length does not match covariance dimension"));
    }
    if a_i.iter().chain(b_i).any(|z| z.re.is_nan() || z.im.is_nan()) {
        return Err(invalid("NaN in atom or B column"));
    }
    let ab = dotc(a_i, b_i);
    debug_assert!(ab.im.abs() <= 1e-8 * ab.norm().max(f64::MIN_POSITIVE));
    let bsb = crate::linalg::hermitian_form(s_hat.matrix(), b_i);
    if bsb.is_nan() {
        return Err(invalid("NaN in sample covariance"));
    }
    Ok(gamma_from_forms(ab.re, bsb))
}

/// Likelihood change from adding atom `i` with power `gamma` at the
/// conditional optimum: `log(1 + γ·aᴴb) − γ·aᴴb`. Always `≤ 0`.
#[inline]
pub fn epsilon(gamma: f64, ab: f64) -> f64 {
    let x = gamma * ab;
    x.ln_1p() - x
}

/// Index of the smallest error; ties go to the smallest index.
pub fn select_atom<I>(errors: I) -> Result<usize>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in errors {
        best = match best {
            None => Some((i, e)),
            Some((bi, be)) if e < be || (e == be && i < bi) => Some((i, e)),
            keep => keep,
        };
    }
    best.map(|(i, _)| i).ok_or_else(|| Error::State("no candidate atoms left to select".into()))
}

/// One sweep entry for a device outside the current support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    /// `aᵢᴴbᵢ`.
    pub ab: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

/// Running state of a CL-MP detection.
#[derive(Debug, Clone)]
pub struct DetectorState {
    b: CMatrix,
    support: Vec<usize>,
    selected: Vec<bool>,
    gamma_hat: Vec<f64>,
}

impl DetectorState {
    /// `B = A/σ²`, empty support.
    pub fn new(pilots: &PilotMatrix, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        let n = pilots.n_devices();
        Ok(Self {
            b: pilots.matrix() * Complex64::new(1.0 / noise_var, 0.0),
            support: Vec::new(),
            selected: vec![false; n],
            gamma_hat: vec![0.0; n],
        })
    }

    /// Current `B = Σ⁻¹A`.
    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// Selected devices in selection order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn gamma_hat(&self) -> &[f64] {
        &self.gamma_hat
    }

    pub fn iteration(&self) -> usize {
        self.support.len()
    }

    /// Evaluates the power update and error for every unselected device,
    /// in increasing index order.
    pub fn sweep(&self, s_hat: &SampleCovariance, pilots: &PilotMatrix) -> Result<Vec<Candidate>> {
        let l = pilots.pilot_len();
        if s_hat.dim() != l {
            return Err(invalid(format!("covariance is {}×{0}, pilots have L = {l}", s_hat.dim())));
        }
        let s = s_hat.matrix().as_slice();
        let b = self.b.as_slice();
        let mut out = Vec::with_capacity(pilots.n_devices() - self.support.len());
        for (i, &taken) in self.selected.iter().enumerate() {
            if taken {
                continue;
            }
            let bi = &b[i * l..(i + 1) * l];
            let ab = dotc_re(pilots.column(i), bi);
            let bsb = hermitian_form_upper(s, bi);
            let gamma = gamma_from_forms(ab, bsb);
            let eps = if gamma > 0.0 { epsilon(gamma, ab) } else { 0.0 };
            out.push(Candidate { index: i, ab, gamma, epsilon: eps });
        }
        Ok(out)
    }

    /// Adds `index` to the support with power `gamma` and applies
    /// `B ← B − γ/(1 + γ·aᴴb)·b·(aᴴB)`.
    pub fn update_b(&mut self, pilots: &PilotMatrix, index: usize, gamma: f64) -> Result<()> {
        let (l, n) = (pilots.pilot_len(), pilots.n_devices());
        if index >= n {
            return Err(invalid(format!("atom index {index} out of range for N = {n}")));
        }
        if self.selected[index] {
            return Err(Error::State(format!("atom {index} is already in the support")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("selected power must be finite and non-negative, got {gamma}")));
        }
        self.selected[index] = true;
        self.support.push(index);
        self.gamma_hat[index] = gamma;
        if gamma == 0.0 {
            return Ok(());
        }

        let a = pilots.column(index);
        let bk: Vec<Complex64> = self.b.as_slice()[index * l..(index + 1) * l].to_vec();
        let ab = dotc_re(a, &bk);
        let denom = 1.0 + gamma * ab;
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!("rank-one update denominator {denom} is not positive")));
        }
        let coef = gamma / denom;
        let data = self.b.as_mut_slice();
        for j in 0..n {
            let col = &mut data[j * l..(j + 1) * l];
            let r = dotc(a, col) * coef;
            for (bv, bkv) in col.iter_mut().zip(&bk) {
                *bv -= bkv * r;
            }
        }
        Ok(())
    }
}

/// `xᴴ S x` for Hermitian `S`, reading only the upper triangle.
#[inline]
fn hermitian_form_upper(s: &[Complex64], x: &[Complex64]) -> f64 {
    let l = x.len();
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..l {
        let col = &s[j * l..j * l + j];
        // t = Σ_{i<j} conj(x_i)·S_ij
        let t = dotc(&x[..j], col);
        let xj = x[j];
        off += t.re * xj.re - t.im * xj.im;
        diag += s[j * l + j].re * xj.norm_sqr();
    }
    diag + 2.0 * off
}

/// Runs CL-MP to completion under `stop`.
pub fn clmp_detect(
    s_hat: &SampleCovariance,
    pilots: &PilotMatrix,
    noise_var: f64,
    stop: StoppingRule,
) -> Result<DetectionResult> {
    let start = Instant::now();
    stop.validate()?;
    let mut state = DetectorState::new(pilots, noise_var)?;
    while state.iteration() < stop.cap() && state.iteration() < pilots.n_devices() {
        let candidates = state.sweep(s_hat, pilots)?;
        if candidates.iter().all(|c| c.gamma == 0.0) {
            break;
        }
        let pick = select_atom(candidates.iter().map(|c| (c.index, c.epsilon)))?;
        let gamma = candidates
            .iter()
            .find(|c| c.index == pick)
            .map(|c| c.gamma)
            .expect("selected index comes from the candidate list");
        if let StoppingRule::PowerThreshold { tau, .. } = stop {
            if gamma < tau {
                break;
            }
        }
        state.update_b(pilots, pick, gamma)?;
    }
    Ok(DetectionResult {
        iterations: state.iteration(),
        support: state.support,
        gamma_hat: state.gamma_hat,
        elapsed: start.elapsed(),
    })
}
