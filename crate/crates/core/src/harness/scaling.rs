//! Runtime scaling: log-log slopes of per-trial detect time.

use crate::error::{Error, Result};

use super::config::{format_plain, Axis, Detector, ExperimentConfig, Sweep};
use super::runner::run_point;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub detector: Detector,
    pub value: f64,
    pub mean_time_s: f64,
    pub median_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub axis: Axis,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `log(mean time)` against `log(value)`, per detector.
    pub slopes: Vec<(Detector, f64)>,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("slope needs two equally long series of at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope undefined for constant abscissa".into()));
    }
    Ok(sxy / sxx)
}

/// Times every detector of `base` at each `values` point of `axis`, single-threaded.
pub fn runtime_scaling_report(base: &ExperimentConfig, axis: Axis, values: &[f64]) -> Result<ScalingReport> {
    if values.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "insufficient points: {} given, at least 4 required",
            values.len()
        )));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("scaling values must be positive".into()));
    }
    let mut cfg = base.clone();
    cfg.groups = None;
    cfg.sweep = Sweep { axis, values: values.to_vec() };
    cfg.validate()?;
    let mut points = Vec::new();
    for (s, &value) in values.iter().enumerate() {
        let outcomes = run_point(&cfg, s, 1).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{axis} = {}: {m}", format_plain(value))),
            other => other,
        })?;
        for (&detector, outs) in cfg.detectors.iter().zip(&outcomes) {
            let mut t: Vec<f64> = outs.iter().map(|o| o.wall_time_s).collect();
            let mean_time_s = t.iter().sum::<f64>() / t.len() as f64;
            t.sort_by(f64::total_cmp);
            points.push(ScalingPoint { detector, value, mean_time_s, median_time_s: t[t.len() / 2] });
        }
    }
    let slopes = cfg
        .detectors
        .iter()
        .map(|&d| {
            let (x, y): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.detector == d)
                .map(|p| (p.value.ln(), p.mean_time_s.max(f64::MIN_POSITIVE).ln()))
                .unzip();
            Ok((d, ls_slope(&x, &y)?))
        })
        .collect::<Result<_>>()?;
    Ok(ScalingReport { axis, points, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|v| (3.0 * v * v).ln()).collect();
        assert!((ls_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_insufficient() {
        let cfg = ExperimentConfig::from_preset("fig8").unwrap();
        let e = runtime_scaling_report(&cfg, Axis::NDevices, &[1000.0]).unwrap_err();
        assert!(e.to_string().contains("insufficient points"));
    }
}
