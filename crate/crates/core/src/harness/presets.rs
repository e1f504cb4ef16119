//! Bundled figure presets.

use crate::error::{Error, Result};

use super::config::RawConfig;

pub const PRESET_NAMES: [&str; 7] = ["fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9"];

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn ints(items: &[i64]) -> Vec<toml::Value> {
    items.iter().map(|&v| toml::Value::Integer(v)).collect()
}

/// Fixed-K scenario with unit noise and uniform large-scale fading in dB.
fn fixed_k_base() -> RawConfig {
    RawConfig {
        n_devices: Some(1000),
        pilot_len: Some(64),
        n_antennas: Some(40),
        pilot_kind: Some("bernoulli".into()),
        lsfc: Some("uniform_db".into()),
        lsfc_min_db: Some(-15.0),
        lsfc_max_db: Some(0.0),
        noise_var_w: Some(1.0),
        p_max_w: Some(1.0),
        power_control: Some(false),
        detectors: Some(strings(&["clmp", "cwo"])),
        trials: Some(2000),
        group_axis: Some("active_devices".into()),
        group_values: Some(ints(&[10, 20, 30, 40, 50])),
        ..RawConfig::default()
    }
}

/// Cell with log-distance path loss, channel inversion and Bernoulli activity.
fn network_base() -> RawConfig {
    RawConfig {
        n_devices: Some(1000),
        pilot_len: Some(64),
        n_antennas: Some(32),
        activation_prob: Some(0.01),
        pilot_kind: Some("bernoulli".into()),
        lsfc: Some("log_distance".into()),
        cell_radius_m: Some(250.0),
        min_radius_m: Some(25.0),
        noise_var_w: Some(2e-13),
        p_max_w: Some(0.1),
        snr_db: Some(10.0),
        power_control: Some(true),
        detectors: Some(strings(&["clmp"])),
        trials: Some(2000),
        ..RawConfig::default()
    }
}

pub fn preset(name: &str) -> Result<RawConfig> {
    let raw = match name {
        "fig2" => RawConfig {
            sweep_axis: Some("n_antennas".into()),
            sweep_values: Some(vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0]),
            ..fixed_k_base()
        },
        "fig3" | "fig4" => RawConfig {
            n_antennas: Some(40),
            sweep_axis: Some("pilot_len".into()),
            sweep_values: Some(vec![32.0, 48.0, 64.0, 80.0]),
            ..fixed_k_base()
        },
        "fig5" => RawConfig {
            detectors: Some(strings(&["clmp", "msbl", "somp"])),
            sweep_axis: Some("snr_db".into()),
            sweep_values: Some((-10..=2).map(|k| 2.0 * k as f64).collect()),
            ..network_base()
        },
        "fig6" => RawConfig {
            sweep_axis: Some("snr_db".into()),
            sweep_values: Some((-10..=2).map(|k| 2.0 * k as f64).collect()),
            group_axis: Some("pilot_kind".into()),
            group_values: Some(vec![toml::Value::String("bernoulli".into()), toml::Value::String("gaussian".into())]),
            ..network_base()
        },
        "fig7" => RawConfig {
            sweep_axis: Some("n_antennas".into()),
            sweep_values: Some(vec![1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]),
            ..network_base()
        },
        "fig8" | "fig9" => RawConfig {
            sweep_axis: Some("n_devices".into()),
            sweep_values: Some((1..=10).map(|k| 1000.0 * k as f64).collect()),
            group_axis: Some("pilot_len".into()),
            group_values: Some(ints(&[16, 32, 48, 56, 72])),
            ..network_base()
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(RawConfig { preset: Some(name.to_string()), ..raw })
}
