//! Seeded Monte-Carlo campaign runner.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{cwo_detect, msbl_detect, somp_detect, CwoConfig};
use crate::detector::{clmp_detect, StoppingRule};
use crate::error::{Error, Result};
use crate::metrics::{err, pmd, TrialOutcome};
use crate::model::{
    gen_lsfc, gen_nonempty_support, gen_pilots, power_control_with_reference, sample_covariance, simulate_trial,
    PilotMatrix, ReceivedSignal, SampleCovariance, TrialGroundTruth,
};

use super::config::{Detector, ExperimentConfig};

/// One aggregated line of output.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_axis: String,
    pub sweep_value: f64,
    /// Detector name, suffixed with the group label when the config has groups.
    pub detector: String,
    pub pmd: f64,
    pub err: f64,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Everything one trial hands to the detectors.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub pilots: PilotMatrix,
    pub truth: TrialGroundTruth,
    pub signal: ReceivedSignal,
    pub s_hat: SampleCovariance,
    pub cwo_seed: u64,
}

/// Substream for one trial, addressed by `(sweep_index, trial_index)`.
pub fn trial_rng(master_seed: u64, sweep_index: usize, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((sweep_index as u64) << 32) | trial_index as u64);
    rng
}

/// Draws pilots, activity, fading, powers and the received signal for a point config.
pub fn generate_trial<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<TrialData> {
    let pilots = gen_pilots(cfg.pilot_kind, cfg.pilot_len, cfg.n_devices, rng)?;
    let support = gen_nonempty_support(cfg.n_devices, cfg.activation, rng)?;
    let lsfc = gen_lsfc(cfg.lsfc, cfg.n_devices, rng)?;
    let p_max = cfg.effective_p_max();
    let tx_power = if cfg.power_control {
        power_control_with_reference(&lsfc, p_max, cfg.lsfc.power_control_reference(&lsfc))?
    } else {
        vec![p_max; cfg.n_devices]
    };
    let truth = TrialGroundTruth::draw(support, lsfc, tx_power, cfg.n_antennas, rng)?;
    let signal = simulate_trial(&pilots, &truth, cfg.n_antennas, cfg.noise_var_w, rng)?;
    let s_hat = sample_covariance(&signal);
    let cwo_seed = rng.random();
    Ok(TrialData { pilots, truth, signal, s_hat, cwo_seed })
}

/// Runs one detector with the trial's realized K; returns the estimate and the detect-call time.
pub fn run_detector(det: Detector, cfg: &ExperimentConfig, data: &TrialData) -> Result<(Vec<usize>, f64)> {
    let k = data.truth.k();
    let noise = cfg.noise_var_w;
    let start = Instant::now();
    let result = match det {
        Detector::Clmp => clmp_detect(&data.s_hat, &data.pilots, noise, StoppingRule::MaxSelections(k)),
        Detector::Cwo => {
            let cwo = CwoConfig { epochs: cfg.cwo_epochs, seed: data.cwo_seed };
            cwo_detect(&data.s_hat, &data.pilots, noise, cwo, k)
        }
        Detector::Somp => somp_detect(&data.signal.y, &data.pilots, k.min(cfg.pilot_len)),
        Detector::Msbl => msbl_detect(&data.signal.y, &data.pilots, noise, cfg.msbl, k),
    }?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((result.support_sorted(), elapsed))
}

/// All trials of one sweep point; outcomes per detector, in `cfg.detectors` order.
pub fn run_point(cfg: &ExperimentConfig, sweep_index: usize, workers: usize) -> Result<Vec<Vec<TrialOutcome>>> {
    let point = cfg.at_sweep(sweep_index)?;
    let trial = |t: usize| -> Result<Vec<TrialOutcome>> {
        let mut rng = trial_rng(cfg.master_seed, sweep_index, t);
        let data = generate_trial(&point, &mut rng)?;
        point
            .detectors
            .iter()
            .map(|&d| {
                let (est, secs) = run_detector(d, &point, &data).map_err(|e| annotate(e, d, sweep_index, t))?;
                Ok(TrialOutcome::new(data.truth.support.clone(), est, secs))
            })
            .collect()
    };
    let per_trial: Vec<Result<Vec<TrialOutcome>>> = if workers <= 1 {
        (0..cfg.trials).map(trial).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..cfg.trials).into_par_iter().map(trial).collect())
    };
    let mut by_detector = vec![Vec::with_capacity(cfg.trials); point.detectors.len()];
    for outcomes in per_trial {
        for (slot, o) in by_detector.iter_mut().zip(outcomes?) {
            slot.push(o);
        }
    }
    Ok(by_detector)
}

fn annotate(e: Error, det: Detector, sweep_index: usize, trial: usize) -> Error {
    let ctx = format!("{det} failed at sweep point {sweep_index}, trial {trial}");
    match e {
        Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
        Error::State(m) => Error::State(format!("{ctx}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
        other => other,
    }
}

fn mean_median(mut xs: Vec<f64>) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) };
    (mean, median)
}

/// Runs every group and sweep point sequentially.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with_workers(cfg, 1)
}

/// Runs every group and sweep point; trials are spread over `workers` threads.
/// Results do not depend on `workers` apart from the timing columns.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (label, group_cfg) in cfg.expand_groups()? {
        for (s, &value) in cfg.sweep.values.iter().enumerate() {
            let outcomes = run_point(&group_cfg, s, workers)?;
            for (&det, outs) in group_cfg.detectors.iter().zip(&outcomes) {
                let (mean_time_s, median_time_s) = mean_median(outs.iter().map(|o| o.wall_time_s).collect());
                rows.push(ResultRow {
                    sweep_axis: cfg.sweep.axis.name().to_string(),
                    sweep_value: value,
                    detector: match &label {
                        Some(l) => format!("{det}:{l}"),
                        None => det.name().to_string(),
                    },
                    pmd: pmd(outs)?,
                    err: err(outs)?,
                    mean_time_s,
                    median_time_s,
                    trials: outs.len(),
                    seed: cfg.master_seed,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value).then_with(|| a.detector.cmp(&b.detector)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let text = r#"
            n_devices = 40
            pilot_len = 12
            n_antennas = 8
            active_devices = 3
            lsfc = "uniform_db"
            noise_var_w = 1.0
            p_max_w = 1.0
            power_control = false
            detectors = ["clmp", "cwo", "somp", "msbl"]
            trials = 6
            sweep_axis = "n_antennas"
            sweep_values = [4, 8]
        "#;
        ExperimentConfig::from_toml_str(text, None).unwrap()
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = trial_rng(5, 0, 1).random();
        let b: u64 = trial_rng(5, 1, 0).random();
        let c: u64 = trial_rng(5, 0, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn rows_cover_grid_and_are_sorted() {
        let rows = run_experiment(&tiny()).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.windows(2).all(|w| (w[0].sweep_value, &w[0].detector) <= (w[1].sweep_value, &w[1].detector)));
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.pmd) && (0.0..=1.0).contains(&r.err));
            assert_eq!(r.trials, 6);
        }
    }

    #[test]
    fn detectors_see_identical_data() {
        let cfg = tiny();
        let point = cfg.at_sweep(0).unwrap();
        let a = generate_trial(&point, &mut trial_rng(1, 0, 3)).unwrap();
        let b = generate_trial(&point, &mut trial_rng(1, 0, 3)).unwrap();
        assert_eq!(a.signal.y, b.signal.y);
        assert_eq!(a.truth.support, b.truth.support);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(mean_median(vec![4.0, 1.0, 3.0, 2.0]), (2.5, 2.5));
        assert_eq!(mean_median(vec![5.0, 1.0, 3.0]), (3.0, 3.0));
    }
}
