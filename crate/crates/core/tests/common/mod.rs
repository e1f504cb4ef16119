//! Instance generators and oracle cross-checks shared by the test targets.
#![allow(dead_code)]

use clmp::baselines::{msbl_run, somp_detect, CwoSolver, MsblConfig};
use clmp::detector::{clmp_detect, epsilon, gamma_candidate, select_atom, DetectorState, StoppingRule};
use clmp::linalg::{cn, cn_matrix, dotc_re, hpd_inverse, max_abs, CMatrix};
use clmp::model::{
    gen_lsfc, gen_pilots, gen_support, sample_covariance, simulate_trial, ActivationMode, LsfcModel, PilotKind,
    PilotMatrix, ReceivedSignal, SampleCovariance, TrialGroundTruth,
};
use clmp::oracle::{
    conditional_llf_change, derivative_checks, direct_b, golden_minimize_gamma, negative_llf, quadratic_forms,
};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A simulated detection problem.
pub struct Instance {
    pub pilots: PilotMatrix,
    pub truth: TrialGroundTruth,
    pub signal: ReceivedSignal,
    pub s_hat: SampleCovariance,
    pub noise_var: f64,
}

/// Fixed-K activity, fading uniform in [−15, 0] dB, noise power drawn log-uniformly.
pub fn instance<R: Rng>(rng: &mut R, kind: PilotKind, l: usize, n: usize, m: usize, k: usize) -> Instance {
    let noise_var = 10f64.powf(rng.random_range(-1.0..1.0));
    let pilots = gen_pilots(kind, l, n, rng).unwrap();
    let support = gen_support(n, ActivationMode::FixedK(k), rng).unwrap();
    let lsfc = gen_lsfc(LsfcModel::UniformDb { min_db: -15.0, max_db: 0.0 }, n, rng).unwrap();
    let tx_power = vec![noise_var * 3.0; n];
    let truth = TrialGroundTruth::draw(support, lsfc, tx_power, m, rng).unwrap();
    let signal = simulate_trial(&pilots, &truth, m, noise_var, rng).unwrap();
    let s_hat = sample_covariance(&signal);
    Instance { pilots, truth, signal, s_hat, noise_var }
}

/// Random Hermitian positive definite matrix `c·I + GGᴴ` with a random rank for `G`.
pub fn random_pdh<R: Rng>(rng: &mut R, l: usize) -> CMatrix {
    let r = rng.random_range(1..=2 * l);
    let var = 10f64.powf(rng.random_range(-1.0..1.0));
    let g = cn_matrix(rng, l, r, var);
    let floor = 10f64.powf(rng.random_range(-1.0..0.5));
    g.clone() * g.adjoint() + CMatrix::identity(l, l) * Complex64::new(floor, 0.0)
}

pub fn random_vector<R: Rng>(rng: &mut R, l: usize) -> Vec<Complex64> {
    (0..l).map(|_| cn(rng, 1.0)).collect()
}

/// Sample covariance of `m` draws from CN(0, Σ₋ᵢ + γ₀aaᴴ), with γ₀ = 0 about a third of the time.
pub fn conditional_sample<R: Rng>(rng: &mut R, sigma_minus_i: &CMatrix, a: &[Complex64]) -> SampleCovariance {
    let l = a.len();
    let q = {
        let inv = hpd_inverse(sigma_minus_i).unwrap();
        let b = &inv * CMatrix::from_column_slice(l, 1, a);
        dotc_re(a, b.as_slice())
    };
    let gamma0 = if rng.random_bool(0.33) { 0.0 } else { 10f64.powf(rng.random_range(-1.5..1.5)) / q };
    let av = CMatrix::from_column_slice(l, 1, a);
    let cov = sigma_minus_i + &av * av.adjoint() * Complex64::new(gamma0, 0.0);
    let chol = cov.cholesky().unwrap();
    let m = rng.random_range(4..=64);
    let y = chol.l() * cn_matrix(rng, l, m, 1.0);
    sample_covariance(&ReceivedSignal { y, noise_var: 1.0 })
}

#[derive(Debug, Default)]
pub struct Tally {
    pub checked: usize,
    pub failures: Vec<String>,
    pub worst: f64,
}

impl Tally {
    pub fn record(&mut self, ok: bool, measure: f64, msg: impl FnOnce() -> String) {
        self.checked += 1;
        self.worst = self.worst.max(measure);
        if !ok {
            self.failures.push(msg());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    pub fn summary(&self) -> String {
        let first = self.failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default();
        format!("{} checks, {} failures, worst measure {:.3e}{first}", self.checked, self.failures.len(), self.worst)
    }
}

/// Closed-form power update against golden-section search, plus derivative signs.
///
/// Agreement is measured on the dimensionless product `γq`:
/// `|γ_closed − γ_golden| ≤ tol·max(γ_closed, 1/q)`.
pub fn check_closed_form_vs_golden(instances: usize, seed: u64, tol: f64) -> (Tally, Tally) {
    let mut rng = rng(seed);
    let mut agree = Tally::default();
    let mut derivs = Tally::default();
    for t in 0..instances {
        let l = rng.random_range(4..=16);
        let sigma = random_pdh(&mut rng, l);
        let a = random_vector(&mut rng, l);
        let s_hat = conditional_sample(&mut rng, &sigma, &a);
        let b = hpd_inverse(&sigma).unwrap() * CMatrix::from_column_slice(l, 1, &a);
        let closed = gamma_candidate(&s_hat, &a, b.as_slice()).unwrap();
        let (q, p) = quadratic_forms(&sigma, &a, &s_hat).unwrap();
        let golden = golden_minimize_gamma(&sigma, &a, &s_hat, 1.0 / q).unwrap();
        let scale = closed.max(1.0 / q);
        let rel = (closed - golden).abs() / scale;
        agree.record(rel <= tol, rel, || format!("instance {t}: closed {closed:e}, golden {golden:e}"));
        if closed > 0.0 {
            let (d1, d2) = derivative_checks(&sigma, &a, &s_hat, closed).unwrap();
            let slope = d1.abs() / (q + p);
            derivs.record(slope < 1e-8 && d2 > 0.0, slope, || format!("instance {t}: l' = {d1:e}, l'' = {d2:e}"));
        }
    }
    (agree, derivs)
}

/// `ε(γ̃)` against the dense conditional objective change `ℓᵢ(γ̃) − ℓᵢ(0)`.
pub fn check_epsilon_identity(instances: usize, seed: u64, tol: f64) -> Tally {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    for t in 0..instances {
        let l = rng.random_range(4..=16);
        let sigma = random_pdh(&mut rng, l);
        let a = random_vector(&mut rng, l);
        let s_hat = conditional_sample(&mut rng, &sigma, &a);
        let b = hpd_inverse(&sigma).unwrap() * CMatrix::from_column_slice(l, 1, &a);
        let ab = dotc_re(&a, b.as_slice());
        let gamma = gamma_candidate(&s_hat, &a, b.as_slice()).unwrap();
        let eps = epsilon(gamma, ab);
        let dense = conditional_llf_change(gamma, &sigma, &a, &s_hat).unwrap();
        let diff = (eps - dense).abs();
        tally.record(diff <= tol, diff, || format!("instance {t}: eps {eps:e}, oracle {dense:e}"));
    }
    tally
}

/// One CL-MP iteration by hand; returns the chosen candidate.
pub fn manual_step(state: &mut DetectorState, inst: &Instance) -> (usize, f64, Vec<f64>) {
    let cands = state.sweep(&inst.s_hat, &inst.pilots).unwrap();
    let idx = select_atom(cands.iter().map(|c| (c.index, c.epsilon))).unwrap();
    let gamma = cands.iter().find(|c| c.index == idx).unwrap().gamma;
    let mut eps: Vec<f64> = cands.iter().map(|c| c.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    state.update_b(&inst.pilots, idx, gamma).unwrap();
    (idx, gamma, eps)
}

/// Incremental `B` against a dense solve after every iteration.
pub fn check_b_update(instances: usize, iterations: usize, seed: u64, tol: f64) -> Tally {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    for t in 0..instances {
        let inst = instance(&mut rng, PilotKind::Gaussian, 32, 128, 64, 20);
        let mut state = DetectorState::new(&inst.pilots, inst.noise_var).unwrap();
        for it in 0..iterations {
            manual_step(&mut state, &inst);
            let dense = direct_b(&inst.pilots, state.gamma_hat(), inst.noise_var).unwrap();
            let rel = max_abs(&(state.b() - &dense)) / max_abs(&dense);
            tally.record(rel <= tol, rel, || format!("instance {t}, iteration {it}: relative error {rel:e}"));
        }
    }
    tally
}

fn non_increasing(values: &[f64], slack: f64) -> Option<(usize, f64)> {
    values.windows(2).enumerate().find_map(|(i, w)| {
        let rise = w[1] - w[0];
        (rise > slack * w[0].abs().max(1.0)).then_some((i, rise))
    })
}

/// Dense objective along CL-MP iterations and along single CWO coordinate steps.
pub fn check_llf_monotone(trials: usize, seed: u64, slack: f64) -> (Tally, Tally) {
    let mut rng = rng(seed);
    let (mut clmp_t, mut cwo_t) = (Tally::default(), Tally::default());
    for t in 0..trials {
        let inst = instance(&mut rng, PilotKind::Bernoulli, 16, 48, 32, 5);
        let obj = |g: &[f64]| negative_llf(g, &inst.pilots, inst.noise_var, &inst.s_hat).unwrap().value;

        let mut state = DetectorState::new(&inst.pilots, inst.noise_var).unwrap();
        let mut path = vec![obj(state.gamma_hat())];
        for _ in 0..8 {
            manual_step(&mut state, &inst);
            path.push(obj(state.gamma_hat()));
        }
        let bad = non_increasing(&path, slack);
        clmp_t.record(bad.is_none(), bad.map_or(0.0, |b| b.1), || format!("trial {t}: rise {bad:?}"));

        let mut solver = CwoSolver::new(&inst.s_hat, &inst.pilots, inst.noise_var, t as u64).unwrap();
        let mut path = vec![obj(solver.gamma())];
        let mut order: Vec<usize> = (0..inst.pilots.n_devices()).collect();
        for _ in 0..2 {
            order.shuffle(&mut rng);
            for &n in &order {
                solver.step(n).unwrap();
                path.push(obj(solver.gamma()));
            }
        }
        let bad = non_increasing(&path, slack);
        cwo_t.record(bad.is_none(), bad.map_or(0.0, |b| b.1), || format!("trial {t}: rise {bad:?}"));
    }
    (clmp_t, cwo_t)
}

/// Draws an instance whose CL-MP run has a clear winner at every iteration.
fn tie_free_instance<R: Rng>(rng: &mut R, k: usize) -> Instance {
    loop {
        let inst = instance(rng, PilotKind::Gaussian, 24, 64, 32, k);
        let mut state = DetectorState::new(&inst.pilots, inst.noise_var).unwrap();
        let clear = (0..k).all(|_| {
            let (_, _, eps) = manual_step(&mut state, &inst);
            eps.len() < 2 || eps[1] - eps[0] > 1e-6 * eps[0].abs().max(1.0)
        });
        if clear {
            return inst;
        }
    }
}

/// Support invariance under `(Ŝ, σ²) → (4Ŝ, 4σ²)` and equivariance under column permutations.
pub fn check_invariances(instances: usize, seed: u64) -> (Tally, Tally) {
    let mut rng = rng(seed);
    let (mut scale_t, mut perm_t) = (Tally::default(), Tally::default());
    let k = 6;
    for t in 0..instances {
        let inst = tie_free_instance(&mut rng, k);
        let stop = StoppingRule::MaxSelections(k);
        let base = clmp_detect(&inst.s_hat, &inst.pilots, inst.noise_var, stop).unwrap().support;

        let scaled = clmp_detect(&inst.s_hat.scaled(4.0), &inst.pilots, 4.0 * inst.noise_var, stop).unwrap().support;
        scale_t.record(scaled == base, 0.0, || format!("instance {t}: {base:?} vs {scaled:?}"));

        let mut perm: Vec<usize> = (0..inst.pilots.n_devices()).collect();
        perm.shuffle(&mut rng);
        let permuted = inst.pilots.permuted(&perm);
        let mapped: Vec<usize> = clmp_detect(&inst.s_hat, &permuted, inst.noise_var, stop)
            .unwrap()
            .support
            .iter()
            .map(|&j| perm[j])
            .collect();
        perm_t.record(mapped == base, 0.0, || format!("instance {t}: {base:?} vs {mapped:?}"));
    }
    (scale_t, perm_t)
}

/// Textbook SOMP: correlate every column with the residual from scratch,
/// refit by pseudo-inverse.
pub fn naive_somp(y: &CMatrix, a: &CMatrix, k: usize) -> Vec<usize> {
    let n = a.ncols();
    let mut chosen: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    for _ in 0..k {
        let corr = a.adjoint() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let score = corr.row(i).norm() / a.column(i).norm();
            if best.is_none() || score > best.unwrap().1 {
                best = Some((i, score));
            }
        }
        chosen.push(best.unwrap().0);
        let cols: Vec<_> = chosen.iter().map(|&c| a.column(c)).collect();
        let sub = CMatrix::from_columns(&cols);
        let x = sub.clone().pseudo_inverse(1e-13).unwrap() * y;
        residual = y - sub * x;
    }
    chosen
}

pub fn check_somp_vs_naive(instances: usize, seed: u64) -> Tally {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    for t in 0..instances {
        let l = rng.random_range(2..=8);
        let n = rng.random_range(l..=12);
        let k = rng.random_range(1..=l);
        let m = rng.random_range(1..=6);
        let inst = instance(&mut rng, PilotKind::Gaussian, l, n, m, k);
        let fast = somp_detect(&inst.signal.y, &inst.pilots, k).unwrap().support;
        let slow = naive_somp(&inst.signal.y, inst.pilots.matrix(), k);
        tally.record(fast == slow, 0.0, || format!("instance {t} (L={l}, N={n}, K={k}): {fast:?} vs {slow:?}"));
    }
    tally
}

pub fn check_msbl_monotone(instances: usize, seed: u64, slack: f64) -> Tally {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    for t in 0..instances {
        let inst = instance(&mut rng, PilotKind::Bernoulli, 16, 60, 16, 4);
        let (_, diag) = msbl_run(&inst.signal.y, &inst.pilots, inst.noise_var, MsblConfig::default()).unwrap();
        let bad = non_increasing(&diag.objective, slack);
        tally.record(bad.is_none(), bad.map_or(0.0, |b| b.1), || format!("instance {t}: rise {bad:?}"));
    }
    tally
}
