//! `densel`: run Monte Carlo risk experiments from the command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use densel_core::harness::report::render;
use densel_core::harness::{emit_report, list, run_experiment, ExperimentConfig, Format, Overrides, ReportBundle, RunOptions};
use densel_core::harness::risk::mc_risk;
use densel_core::Error;

#[derive(Parser)]
#[command(name = "densel", version, about = "Monte Carlo risk experiments for density estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON experiment config or a catalog experiment.
    Run {
        /// Path to a config file, or a catalog name (see `densel list`).
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long = "c-eta")]
        c_eta: Option<f64>,
        /// Report wall_ms as 0 so output is reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Print the experiment catalog.
    List,
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownExperiment(_) | Error::Json(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn is_config_path(target: &str) -> bool {
    target.ends_with(".json") || Path::new(target).is_file()
}

fn run_config(mut cfg: ExperimentConfig, ov: &Overrides, opts: &RunOptions) -> Result<ReportBundle, Failure> {
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(r) = ov.reps {
        cfg.reps = r;
    }
    if let Some(c) = ov.c_eta {
        cfg.params.c_eta = c;
    }
    cfg.validate()?;
    let echo = serde_json::to_value(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut bundle = ReportBundle::new(&cfg.name, echo);
    bundle.reports.push(mc_risk(&cfg, opts)?);
    Ok(bundle)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::List => {
            let mut out = std::io::stdout().lock();
            for e in list() {
                let _ = writeln!(out, "{:<18} reps={:<4} ~{}s  {}", e.name, e.default_reps, e.expected_secs, e.description);
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("ok: {} ({}, n={}, reps={})", cfg.name, cfg.estimator.kind(), cfg.n, cfg.reps);
            Ok(())
        }
        Command::Run { target, seed, reps, out, format, jobs, c_eta, no_timing } => {
            if c_eta.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
                return Err(Failure::Config("--c-eta must be positive".into()));
            }
            if reps == Some(0) {
                return Err(Failure::Config("--reps must be at least 1".into()));
            }
            let ov = Overrides { seed, reps, c_eta, ..Default::default() };
            let opts = RunOptions { jobs, timing: !no_timing };
            let bundle = if is_config_path(&target) {
                run_config(load_config(Path::new(&target))?, &ov, &opts)?
            } else {
                run_experiment(&target, &ov, &opts)?
            };
            for c in &bundle.checks {
                eprintln!("{} {} = {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.value);
            }
            match out {
                Some(path) => emit_report(&bundle, format.into(), &path)?,
                None => {
                    let bytes = render(&bundle, format.into())?;
                    std::io::stdout().lock().write_all(&bytes).map_err(|e| Failure::Runtime(e.to_string()))?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
