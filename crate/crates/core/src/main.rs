use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clmp::harness::{parse_detector_list, run_experiment_with_workers, write_csv, ExperimentConfig};
use clmp::Error;

#[derive(Parser)]
#[command(name = "clmp", version, about = "Device-activity detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign and write CSV results.
    Run {
        /// Flat TOML config; may be omitted when --preset is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// fig2, fig3, fig5, fig6, fig7, fig8 or fig9.
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated subset of clmp,cwo,somp,msbl.
        #[arg(long)]
        detectors: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> clmp::Result<ExperimentConfig> {
    match (config, preset) {
        (Some(path), preset) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_toml_str(&text, preset.as_deref())
        }
        (None, Some(name)) => ExperimentConfig::from_preset(&name),
        (None, None) => Err(Error::Config("either --config or --preset is required".into())),
    }
}

fn run(cmd: Command) -> clmp::Result<()> {
    let Command::Run { config, out, seed, preset, detectors, trials, workers } = cmd;
    let mut cfg = load(config, preset)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(d) = detectors {
        cfg.detectors = parse_detector_list(&d)?;
    }
    if let Some(q) = trials {
        cfg.trials = q;
    }
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    cfg.validate()?;
    let rows = run_experiment_with_workers(&cfg, workers)?;
    match out {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(path)?)),
        None => write_csv(&rows, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
