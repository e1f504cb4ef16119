//! Experiment orchestration: configuration, presets, seeded campaigns, CSV output
//! and runtime scaling.

mod config;
mod csv_io;
mod presets;
mod runner;
mod scaling;

pub use config::{parse_detector_list, snr_to_pmax, Axis, Detector, ExperimentConfig, Groups, RawConfig, Sweep};
pub use csv_io::{format_f64, read_csv, write_csv, CSV_HEADER};
pub use presets::{preset, PRESET_NAMES};
pub use runner::{
    generate_trial, run_detector, run_experiment, run_experiment_with_workers, run_point, trial_rng, ResultRow,
    TrialData,
};
pub use scaling::{ls_slope, runtime_scaling_report, ScalingPoint, ScalingReport};
