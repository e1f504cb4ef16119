//! Experiment configuration: a flat TOML document layered over an optional
//! figure preset and the simulation defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::baselines::MsblConfig;
use crate::error::{Error, Result};
use crate::model::{db_to_linear, ActivationMode, LsfcModel, PilotKind};

use super::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detector {
    Clmp,
    Cwo,
    Somp,
    Msbl,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::Clmp, Detector::Cwo, Detector::Somp, Detector::Msbl];

    pub fn name(self) -> &'static str {
        match self {
            Detector::Clmp => "clmp",
            Detector::Cwo => "cwo",
            Detector::Somp => "somp",
            Detector::Msbl => "msbl",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown detector `{s}` (expected clmp, cwo, somp or msbl)")))
    }
}

pub fn parse_detector_list(s: &str) -> Result<Vec<Detector>> {
    let mut out: Vec<Detector> =
        s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Config("detector list is empty".into()));
    }
    Ok(out)
}

/// A scenario parameter that can be swept or grouped over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    NDevices,
    PilotLen,
    NAntennas,
    ActiveDevices,
    ActivationProb,
    SnrDb,
    NoiseVar,
    PilotKind,
}

impl Axis {
    const NAMES: [(Axis, &'static str, &'static str); 8] = [
        (Axis::NDevices, "n_devices", "N"),
        (Axis::PilotLen, "pilot_len", "L"),
        (Axis::NAntennas, "n_antennas", "M"),
        (Axis::ActiveDevices, "active_devices", "K"),
        (Axis::ActivationProb, "activation_prob", "eps"),
        (Axis::SnrDb, "snr_db", "SNR"),
        (Axis::NoiseVar, "noise_var_w", "sigma2"),
        (Axis::PilotKind, "pilot_kind", "pilots"),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(a, ..)| *a == self).map(|(_, n, _)| *n).unwrap()
    }

    /// Short symbol used in series labels.
    pub fn symbol(self) -> &'static str {
        Self::NAMES.iter().find(|(a, ..)| *a == self).map(|(.., s)| *s).unwrap()
    }

    pub fn is_numeric(self) -> bool {
        self != Axis::PilotKind
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(_, n, _)| *n == s)
            .map(|(a, ..)| *a)
            .ok_or_else(|| Error::Config(format!("unknown axis `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Secondary parameter: one full campaign per value, tagged in the detector label.
#[derive(Debug, Clone, PartialEq)]
pub struct Groups {
    pub axis: Axis,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_devices: usize,
    pub pilot_len: usize,
    pub n_antennas: usize,
    pub activation: ActivationMode,
    pub pilot_kind: PilotKind,
    pub lsfc: LsfcModel,
    pub noise_var_w: f64,
    pub p_max_w: f64,
    /// When set, `p_max` is derived from this cell-edge SNR.
    pub snr_db: Option<f64>,
    /// Channel-inversion power control; otherwise every device transmits at `p_max`.
    pub power_control: bool,
    pub detectors: Vec<Detector>,
    pub trials: usize,
    pub master_seed: u64,
    pub sweep: Sweep,
    pub groups: Option<Groups>,
    pub cwo_epochs: usize,
    pub msbl: MsblConfig,
    /// Coherence interval in symbols; carried for documentation only.
    pub coherence_interval: usize,
}

/// `p_max = σ²·10^(snr/10) / β_min`, inverting `SNR = p_max·β_min/σ²`.
pub fn snr_to_pmax(snr_db: f64, beta_min: f64, noise_var: f64) -> f64 {
    noise_var * db_to_linear(snr_db) / beta_min
}

impl ExperimentConfig {
    /// Transmit power cap after applying the SNR override.
    pub fn effective_p_max(&self) -> f64 {
        match self.snr_db {
            Some(snr) => snr_to_pmax(snr, self.lsfc.beta_floor(), self.noise_var_w),
            None => self.p_max_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.detectors.is_empty() {
            return bad("at least one detector is required");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.cwo_epochs == 0 {
            return bad("cwo_epochs must be at least 1");
        }
        if self.msbl.max_iters == 0 || !(self.msbl.rel_tol > 0.0) || !(self.msbl.gamma_floor > 0.0) {
            return bad("msbl settings must be positive");
        }
        if self.sweep.values.is_empty() {
            return bad("sweep_values must not be empty");
        }
        if !self.sweep.axis.is_numeric() {
            return bad("pilot_kind can only be a group axis");
        }
        if let Some(g) = &self.groups {
            if g.values.is_empty() {
                return bad("group_values must not be empty");
            }
            if g.axis == self.sweep.axis {
                return bad("group axis must differ from the sweep axis");
            }
        }
        for (label, group) in self.expand_groups()? {
            for (i, &v) in self.sweep.values.iter().enumerate() {
                group.at_sweep(i).and_then(|p| p.validate_point()).map_err(|e| match e {
                    Error::Config(m) => {
                        let group = label.as_deref().map(|l| format!("{l}, ")).unwrap_or_default();
                        Error::Config(format!("{group}{} = {v}: {m}", self.sweep.axis))
                    }
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// Checks the scenario parameters of a single grid point.
    fn validate_point(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_devices == 0 || self.pilot_len == 0 || self.n_antennas == 0 {
            return bad("n_devices, pilot_len and n_antennas must be positive".into());
        }
        match self.activation {
            ActivationMode::FixedK(0) => return bad("active_devices must be at least 1".into()),
            ActivationMode::FixedK(k) if k > self.n_devices => {
                return bad(format!("active_devices = {k} exceeds n_devices = {}", self.n_devices))
            }
            ActivationMode::Bernoulli(p) if !(p > 0.0 && p <= 1.0) => {
                return bad(format!("activation_prob must be in (0, 1], got {p}"))
            }
            _ => {}
        }
        self.lsfc.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.noise_var_w > 0.0 && self.noise_var_w.is_finite()) {
            return bad(format!("noise_var_w must be positive, got {}", self.noise_var_w));
        }
        if !(self.p_max_w > 0.0 && self.p_max_w.is_finite()) {
            return bad(format!("p_max_w must be positive, got {}", self.p_max_w));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return bad("snr_db must be finite".into());
        }
        Ok(())
    }

    /// Copy with `axis` set to the textual `value`.
    pub fn with_param(&self, axis: Axis, value: &str) -> Result<Self> {
        let mut c = self.clone();
        let num = || -> Result<f64> {
            value.trim().parse::<f64>().map_err(|_| Error::Config(format!("`{value}` is not a number for {axis}")))
        };
        let count = || -> Result<usize> {
            let v = num()?;
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::Config(format!("{axis} needs a non-negative integer, got {value}")));
            }
            Ok(v as usize)
        };
        match axis {
            Axis::NDevices => c.n_devices = count()?,
            Axis::PilotLen => c.pilot_len = count()?,
            Axis::NAntennas => c.n_antennas = count()?,
            Axis::ActiveDevices => c.activation = ActivationMode::FixedK(count()?),
            Axis::ActivationProb => c.activation = ActivationMode::Bernoulli(num()?),
            Axis::SnrDb => c.snr_db = Some(num()?),
            Axis::NoiseVar => c.noise_var_w = num()?,
            Axis::PilotKind => c.pilot_kind = value.parse()?,
        }
        Ok(c)
    }

    /// Copy with the sweep axis set to its `index`-th value.
    pub fn at_sweep(&self, index: usize) -> Result<Self> {
        let v =
            self.sweep.values.get(index).ok_or_else(|| Error::Config(format!("sweep index {index} out of range")))?;
        self.with_param(self.sweep.axis, &format_plain(*v))
    }

    /// One config per group value (or just `self`), with the label suffix for each.
    pub fn expand_groups(&self) -> Result<Vec<(Option<String>, ExperimentConfig)>> {
        match &self.groups {
            None => Ok(vec![(None, self.clone())]),
            Some(g) => g
                .values
                .iter()
                .map(|v| {
                    let mut c = self.with_param(g.axis, v)?;
                    c.groups = None;
                    Ok((Some(format!("{}={}", g.axis.symbol(), v)), c))
                })
                .collect(),
        }
    }

    /// Loads a config file, layering it over its `preset` (if any) and the defaults.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, None)
    }

    /// Parses `text`, layered over `preset` (or the document's own `preset` key).
    pub fn from_toml_str(text: &str, preset: Option<&str>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let preset_name = preset.map(str::to_string).or_else(|| raw.preset.clone());
        let base = match preset_name {
            Some(name) => presets::preset(&name)?,
            None => RawConfig::default(),
        };
        base.overlay(raw).resolve()
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        presets::preset(name)?.resolve()
    }
}

/// Formats a number without trailing noise: integers without a fraction.
pub(crate) fn format_plain(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Flat on-disk form. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub n_devices: Option<usize>,
    pub pilot_len: Option<usize>,
    pub n_antennas: Option<usize>,
    pub active_devices: Option<usize>,
    pub activation_prob: Option<f64>,
    pub pilot_kind: Option<String>,
    pub lsfc: Option<String>,
    pub lsfc_min_db: Option<f64>,
    pub lsfc_max_db: Option<f64>,
    pub cell_radius_m: Option<f64>,
    pub min_radius_m: Option<f64>,
    pub noise_var_w: Option<f64>,
    pub p_max_w: Option<f64>,
    pub snr_db: Option<f64>,
    pub power_control: Option<bool>,
    pub detectors: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub sweep_axis: Option<String>,
    pub sweep_values: Option<Vec<f64>>,
    pub group_axis: Option<String>,
    pub group_values: Option<Vec<toml::Value>>,
    pub cwo_epochs: Option<usize>,
    pub msbl_max_iters: Option<usize>,
    pub msbl_rel_tol: Option<f64>,
    pub msbl_gamma_floor: Option<f64>,
    pub coherence_interval: Option<usize>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RawConfig {
    /// Keys set in `top` replace those in `self`. Setting either activation
    /// key replaces both.
    pub fn overlay(mut self, top: RawConfig) -> RawConfig {
        if top.active_devices.is_some() || top.activation_prob.is_some() {
            self.active_devices = None;
            self.activation_prob = None;
        }
        if top.group_axis.is_some() {
            self.group_values = None;
        }
        if top.sweep_axis.is_some() {
            self.sweep_values = None;
        }
        overlay_fields!(self, top; preset, n_devices, pilot_len, n_antennas, active_devices, activation_prob,
            pilot_kind, lsfc, lsfc_min_db, lsfc_max_db, cell_radius_m, min_radius_m, noise_var_w, p_max_w,
            snr_db, power_control, detectors, trials, master_seed, sweep_axis, sweep_values, group_axis,
            group_values, cwo_epochs, msbl_max_iters, msbl_rel_tol, msbl_gamma_floor, coherence_interval);
        self
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let cfg_err = |m: &str| Error::Config(m.to_string());
        let activation = match (self.active_devices, self.activation_prob) {
            (Some(_), Some(_)) => return Err(cfg_err("set only one of active_devices and activation_prob")),
            (Some(k), None) => ActivationMode::FixedK(k),
            (None, Some(p)) => ActivationMode::Bernoulli(p),
            (None, None) => ActivationMode::Bernoulli(0.01),
        };
        let lsfc = match self.lsfc.as_deref().unwrap_or("log_distance") {
            "uniform_db" => {
                if self.cell_radius_m.is_some() || self.min_radius_m.is_some() {
                    return Err(cfg_err("cell_radius_m/min_radius_m only apply to lsfc = \"log_distance\""));
                }
                LsfcModel::UniformDb {
                    min_db: self.lsfc_min_db.unwrap_or(-15.0),
                    max_db: self.lsfc_max_db.unwrap_or(0.0),
                }
            }
            "log_distance" => {
                if self.lsfc_min_db.is_some() || self.lsfc_max_db.is_some() {
                    return Err(cfg_err("lsfc_min_db/lsfc_max_db only apply to lsfc = \"uniform_db\""));
                }
                LsfcModel::LogDistance {
                    cell_radius_m: self.cell_radius_m.unwrap_or(250.0),
                    min_radius_m: self.min_radius_m.unwrap_or(25.0),
                }
            }
            other => return Err(Error::Config(format!("unknown lsfc model `{other}`"))),
        };
        let detectors = match self.detectors {
            Some(list) => parse_detector_list(&list.join(","))?,
            None => vec![Detector::Clmp],
        };
        let sweep_axis: Axis = self.sweep_axis.as_deref().ok_or_else(|| cfg_err("sweep_axis is required"))?.parse()?;
        let sweep_values = self.sweep_values.ok_or_else(|| cfg_err("sweep_values is required"))?;
        let groups = match (self.group_axis, self.group_values) {
            (None, None) => None,
            (Some(axis), Some(values)) => Some(Groups {
                axis: axis.parse()?,
                values: values
                    .into_iter()
                    .map(|v| match v {
                        toml::Value::String(s) => Ok(s),
                        toml::Value::Integer(i) => Ok(i.to_string()),
                        toml::Value::Float(f) => Ok(format_plain(f)),
                        other => Err(Error::Config(format!("unsupported group value {other}"))),
                    })
                    .collect::<Result<_>>()?,
            }),
            _ => return Err(cfg_err("group_axis and group_values go together")),
        };
        let defaults = MsblConfig::default();
        let cfg = ExperimentConfig {
            n_devices: self.n_devices.unwrap_or(1000),
            pilot_len: self.pilot_len.unwrap_or(64),
            n_antennas: self.n_antennas.unwrap_or(32),
            activation,
            pilot_kind: self.pilot_kind.as_deref().unwrap_or("bernoulli").parse()?,
            lsfc,
            noise_var_w: self.noise_var_w.unwrap_or(2e-13),
            p_max_w: self.p_max_w.unwrap_or(0.1),
            snr_db: self.snr_db,
            power_control: self.power_control.unwrap_or(true),
            detectors,
            trials: self.trials.unwrap_or(2000),
            master_seed: self.master_seed.unwrap_or(1),
            sweep: Sweep { axis: sweep_axis, values: sweep_values },
            groups,
            cwo_epochs: self.cwo_epochs.unwrap_or(15),
            msbl: MsblConfig {
                max_iters: self.msbl_max_iters.unwrap_or(defaults.max_iters),
                rel_tol: self.msbl_rel_tol.unwrap_or(defaults.rel_tol),
                gamma_floor: self.msbl_gamma_floor.unwrap_or(defaults.gamma_floor),
            },
            coherence_interval: self.coherence_interval.unwrap_or(300),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        sweep_axis = "n_antennas"
        sweep_values = [10, 20]
    "#;

    #[test]
    fn defaults_follow_simulation_table() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, None).unwrap();
        assert_eq!((c.n_devices, c.pilot_len, c.n_antennas, c.trials), (1000, 64, 32, 2000));
        assert_eq!(c.activation, ActivationMode::Bernoulli(0.01));
        assert_eq!(c.noise_var_w, 2e-13);
        assert_eq!(c.p_max_w, 0.1);
        assert_eq!(c.msbl, MsblConfig { max_iters: 150, rel_tol: 1e-6, gamma_floor: 1e-12 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nn_antenas = 3\n");
        let e = ExperimentConfig::from_toml_str(&text, None).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("n_antenas"));
    }

    #[test]
    fn zero_k_is_rejected() {
        let text = format!("{MINIMAL}\nactive_devices = 0\ntrials = 1\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text, None), Err(Error::Config(_))));
    }

    #[test]
    fn conflicting_activation_rejected() {
        let text = format!("{MINIMAL}\nactive_devices = 3\nactivation_prob = 0.1\n");
        assert!(ExperimentConfig::from_toml_str(&text, None).is_err());
    }

    #[test]
    fn sweep_is_required() {
        assert!(ExperimentConfig::from_toml_str("n_devices = 10", None).is_err());
    }

    #[test]
    fn preset_overlay() {
        let c = ExperimentConfig::from_toml_str("trials = 7\nactivation_prob = 0.02", Some("fig2")).unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.activation, ActivationMode::Bernoulli(0.02));
        assert_eq!(c.sweep.axis, Axis::NAntennas);
    }

    #[test]
    fn snr_inversion() {
        assert!((snr_to_pmax(0.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        let edge = LsfcModel::LogDistance { cell_radius_m: 250.0, min_radius_m: 25.0 }.beta_floor();
        let p = snr_to_pmax(10.0, edge, 2e-13);
        assert!((p * edge / 2e-13 - 10.0).abs() < 1e-12);
        let ps: Vec<f64> = (-10..=2).map(|k| snr_to_pmax(2.0 * k as f64, edge, 2e-13)).collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn sweep_and_group_application() {
        let text = r#"
            sweep_axis = "pilot_len"
            sweep_values = [16, 32]
            group_axis = "pilot_kind"
            group_values = ["bernoulli", "gaussian"]
        "#;
        let c = ExperimentConfig::from_toml_str(text, None).unwrap();
        assert_eq!(c.at_sweep(1).unwrap().pilot_len, 32);
        let groups = c.expand_groups().unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[1].0.as_deref(), Some("pilots=gaussian"));
        assert_eq!(groups[1].1.pilot_kind, PilotKind::Gaussian);
        assert!(c.with_param(Axis::PilotLen, "2.5").is_err());
    }

    #[test]
    fn detector_lists() {
        assert_eq!(parse_detector_list("msbl,clmp,clmp").unwrap(), vec![Detector::Clmp, Detector::Msbl]);
        assert!(parse_detector_list("clmp,vamp").is_err());
        assert!(parse_detector_list("").is_err());
    }
}
