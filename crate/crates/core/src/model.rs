//! Uplink scenario generation: pilots, device activity, large-scale fading,
//! power control, Rayleigh channels and the received pilot block.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cn, cn_matrix, norm_sqr, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PilotKind {
    /// i.i.d. CN(0,1) entries, each column rescaled to energy `L`.
    Gaussian,
    /// Real ±1 entries.
    Bernoulli,
}

impl PilotKind {
    pub fn name(self) -> &'static str {
        match self {
            PilotKind::Gaussian => "gaussian",
            PilotKind::Bernoulli => "bernoulli",
        }
    }
}

impl fmt::Display for PilotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PilotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "g-mat" | "gmat" => Ok(PilotKind::Gaussian),
            "bernoulli" | "b-mat" | "bmat" => Ok(PilotKind::Bernoulli),
            other => Err(Error::Config(format!("unknown pilot kind `{other}`"))),
        }
    }
}

/// `L × N` dictionary whose columns are the per-device pilot sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    entries: CMatrix,
    kind: PilotKind,
}

impl PilotMatrix {
    /// Wraps an existing dictionary. Column energies are not renormalized.
    pub fn from_matrix(entries: CMatrix, kind: PilotKind) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(invalid("pilot matrix must be non-empty"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("pilot matrix has non-finite entries"));
        }
        Ok(Self { entries, kind })
    }

    pub fn pilot_len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_devices(&self) -> usize {
        self.entries.ncols()
    }

    pub fn kind(&self) -> PilotKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    /// Column `n` as a contiguous slice.
    pub fn column(&self, n: usize) -> &[Complex64] {
        let l = self.pilot_len();
        &self.entries.as_slice()[n * l..(n + 1) * l]
    }

    /// Returns a copy with columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let cols: Vec<_> = perm.iter().map(|&p| self.entries.column(p)).collect();
        Self { entries: CMatrix::from_columns(&cols), kind: self.kind }
    }
}

pub fn gen_pilots<R: Rng + ?Sized>(
    kind: PilotKind,
    pilot_len: usize,
    n_devices: usize,
    rng: &mut R,
) -> Result<PilotMatrix> {
    if pilot_len == 0 || n_devices == 0 {
        return Err(invalid(format!("pilot dimensions must be positive, got {pilot_len}×{n_devices}")));
    }
    let entries = match kind {
        PilotKind::Bernoulli => {
            let data = (0..pilot_len * n_devices)
                .map(|_| Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
                .collect();
            CMatrix::from_vec(pilot_len, n_devices, data)
        }
        PilotKind::Gaussian => {
            let mut m = cn_matrix(rng, pilot_len, n_devices, 1.0);
            for mut col in m.column_iter_mut() {
                let energy = norm_sqr(col.as_slice());
                let scale = (pilot_len as f64 / energy).sqrt();
                col.iter_mut().for_each(|z| *z *= scale);
            }
            m
        }
    };
    Ok(PilotMatrix { entries, kind })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationMode {
    FixedK(usize),
    /// Each device independently active with this probability.
    Bernoulli(f64),
}

/// Draws a sorted active set. Bernoulli draws may be empty; see
/// [`gen_nonempty_support`] for the trial generator's policy.
pub fn gen_support<R: Rng + ?Sized>(n_devices: usize, mode: ActivationMode, rng: &mut R) -> Result<Vec<usize>> {
    let mut support = match mode {
        ActivationMode::FixedK(k) => {
            if k > n_devices {
                return Err(invalid(format!("K = {k} exceeds N = {n_devices}")));
            }
            index::sample(rng, n_devices, k).into_vec()
        }
        ActivationMode::Bernoulli(eps) => {
            if !(0.0..=1.0).contains(&eps) {
                return Err(invalid(format!("activation probability {eps} outside [0, 1]")));
            }
            (0..n_devices).filter(|_| rng.random::<f64>() < eps).collect()
        }
    };
    support.sort_unstable();
    Ok(support)
}

/// Redraws until at least one device is active.
pub fn gen_nonempty_support<R: Rng + ?Sized>(
    n_devices: usize,
    mode: ActivationMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    match mode {
        ActivationMode::FixedK(0) => Err(invalid("K must be at least 1")),
        ActivationMode::Bernoulli(eps) if eps <= 0.0 => Err(invalid("activation probability must be positive")),
        _ => loop {
            let s = gen_support(n_devices, mode, rng)?;
            if !s.is_empty() {
                return Ok(s);
            }
        },
    }
}

/// Large-scale fading model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LsfcModel {
    /// `10·log₁₀ β` uniform on `[min_db, max_db]`.
    UniformDb { min_db: f64, max_db: f64 },
    /// Devices uniform in distance on `[min_radius_m, cell_radius_m]`,
    /// with `β = −130 − 37.6·log₁₀(d / 1 km)` dB.
    LogDistance { cell_radius_m: f64, min_radius_m: f64 },
}

impl LsfcModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LsfcModel::UniformDb { min_db, max_db } => {
                if !(min_db.is_finite() && max_db.is_finite()) || min_db > max_db {
                    return Err(invalid(format!("uniform dB range [{min_db}, {max_db}] is invalid")));
                }
            }
            LsfcModel::LogDistance { cell_radius_m, min_radius_m } => {
                if !(min_radius_m > 0.0 && min_radius_m < cell_radius_m && cell_radius_m.is_finite()) {
                    return Err(invalid(format!(
                        "need 0 < min radius ({min_radius_m}) < cell radius ({cell_radius_m})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fading at the worst-placed position the model allows: the cell edge
    /// for `LogDistance`, the lower end of the range for `UniformDb`.
    pub fn beta_floor(&self) -> f64 {
        match *self {
            LsfcModel::UniformDb { min_db, .. } => db_to_linear(min_db),
            LsfcModel::LogDistance { cell_radius_m, .. } => db_to_linear(path_loss_db(cell_radius_m)),
        }
    }

    /// Reference `β_min` used by channel-inversion power control: the analytic
    /// cell-edge value for `LogDistance`, the realized population minimum otherwise.
    pub fn power_control_reference(&self, lsfc: &[f64]) -> f64 {
        match self {
            LsfcModel::LogDistance { .. } => self.beta_floor(),
            LsfcModel::UniformDb { .. } => lsfc.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Log-distance path loss in dB at `distance_m` meters.
pub fn path_loss_db(distance_m: f64) -> f64 {
    -130.0 - 37.6 * (distance_m / 1000.0).log10()
}

pub fn gen_lsfc<R: Rng + ?Sized>(model: LsfcModel, n_devices: usize, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    let lsfc = match model {
        LsfcModel::UniformDb { min_db, max_db } => {
            (0..n_devices).map(|_| db_to_linear(min_db + (max_db - min_db) * rng.random::<f64>())).collect()
        }
        LsfcModel::LogDistance { cell_radius_m, min_radius_m } => (0..n_devices)
            .map(|_| {
                let d = min_radius_m + (cell_radius_m - min_radius_m) * rng.random::<f64>();
                db_to_linear(path_loss_db(d))
            })
            .collect(),
    };
    Ok(lsfc)
}

/// Channel inversion against the population minimum: `ρₙ = p_max·β_min/βₙ`.
pub fn power_control(lsfc: &[f64], p_max: f64) -> Result<Vec<f64>> {
    let beta_min = lsfc.iter().copied().fold(f64::INFINITY, f64::min);
    power_control_with_reference(lsfc, p_max, beta_min)
}

/// Channel inversion against an explicit reference `β_min`.
pub fn power_control_with_reference(lsfc: &[f64], p_max: f64, beta_min: f64) -> Result<Vec<f64>> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(invalid(format!("p_max must be positive, got {p_max}")));
    }
    if !(beta_min > 0.0 && beta_min.is_finite()) {
        return Err(invalid(format!("reference β_min must be positive, got {beta_min}")));
    }
    lsfc.iter()
        .map(|&b| {
            if b > 0.0 && b.is_finite() {
                Ok(p_max * beta_min / b)
            } else {
                Err(invalid(format!("large-scale fading coefficient must be positive, got {b}")))
            }
        })
        .collect()
}

/// Everything the receiver does not see about one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialGroundTruth {
    /// Sorted active set.
    pub support: Vec<usize>,
    /// Effective powers `γₙ = αₙρₙβₙ`.
    pub gamma_true: Vec<f64>,
    /// `K × M`; row `k` is the channel of `support[k]`.
    pub channels: CMatrix,
    pub lsfc: Vec<f64>,
    pub tx_power: Vec<f64>,
}

impl TrialGroundTruth {
    /// Draws CN(0, I) channels for the active devices and assembles the effective powers.
    pub fn draw<R: Rng + ?Sized>(
        support: Vec<usize>,
        lsfc: Vec<f64>,
        tx_power: Vec<f64>,
        n_antennas: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = lsfc.len();
        if tx_power.len() != n {
            return Err(invalid("lsfc and tx_power lengths differ"));
        }
        if n_antennas == 0 {
            return Err(invalid("antenna count must be positive"));
        }
        let mut gamma_true = vec![0.0; n];
        for w in support.windows(2) {
            if w[0] >= w[1] {
                return Err(invalid("support must be sorted and distinct"));
            }
        }
        for &i in &support {
            if i >= n {
                return Err(invalid(format!("support index {i} out of range for N = {n}")));
            }
            gamma_true[i] = tx_power[i] * lsfc[i];
            if gamma_true[i] <= 0.0 {
                return Err(invalid(format!("active device {i} has zero effective power")));
            }
        }
        let channels = cn_matrix(rng, support.len(), n_antennas, 1.0);
        Ok(Self { support, gamma_true, channels, lsfc, tx_power })
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    /// `L × M` received pilot block.
    pub y: CMatrix,
    pub noise_var: f64,
}

impl ReceivedSignal {
    pub fn n_antennas(&self) -> usize {
        self.y.ncols()
    }
}

/// `Y = A·X + W`, with `xₙ = √γₙ·hₙ` on the support and `W` i.i.d. CN(0, σ²).
pub fn simulate_trial<R: Rng + ?Sized>(
    pilots: &PilotMatrix,
    truth: &TrialGroundTruth,
    n_antennas: usize,
    noise_var: f64,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {noise_var}")));
    }
    if truth.gamma_true.len() != pilots.n_devices() {
        return Err(invalid("ground truth and pilot matrix disagree on N"));
    }
    if truth.channels.ncols() != n_antennas || truth.channels.nrows() != truth.k() {
        return Err(invalid("channel matrix does not match K × M"));
    }
    let l = pilots.pilot_len();
    let mut y = CMatrix::from_fn(l, n_antennas, |_, _| cn(rng, noise_var));
    for (k, &dev) in truth.support.iter().enumerate() {
        let amp = truth.gamma_true[dev].sqrt();
        let a = pilots.column(dev);
        for m in 0..n_antennas {
            let x = truth.channels[(k, m)] * amp;
            let col = &mut y.as_mut_slice()[m * l..(m + 1) * l];
            for (yv, av) in col.iter_mut().zip(a) {
                *yv += av * x;
            }
        }
    }
    Ok(ReceivedSignal { y, noise_var })
}

/// Sample covariance `Ŝ = Y·Yᴴ / M`, stored exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    s_hat: CMatrix,
}

impl SampleCovariance {
    /// Wraps a matrix that the caller asserts is Hermitian PSD.
    pub fn from_matrix(s_hat: CMatrix) -> Result<Self> {
        if !s_hat.is_square() || s_hat.nrows() == 0 {
            return Err(invalid("sample covariance must be square and non-empty"));
        }
        if s_hat.iter().any(|z| z.re.is_nan() || z.im.is_nan()) {
            return Err(invalid("sample covariance contains NaN"));
        }
        Ok(Self { s_hat })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.s_hat
    }

    pub fn dim(&self) -> usize {
        self.s_hat.nrows()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { s_hat: &self.s_hat * Complex64::new(c, 0.0) }
    }
}

pub fn sample_covariance(signal: &ReceivedSignal) -> SampleCovariance {
    let y = &signal.y;
    let (l, m) = y.shape();
    let mut s = CMatrix::zeros(l, l);
    let inv_m = 1.0 / m.max(1) as f64;
    for j in 0..l {
        for i in j..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..m {
                acc += y[(i, t)] * y[(j, t)].conj();
            }
            acc *= inv_m;
            s[(i, j)] = acc;
            s[(j, i)] = acc.conj();
        }
        s[(j, j)].im = 0.0;
    }
    SampleCovariance { s_hat: s }
}
