//! `abc-rates`: runs one experiment from a JSON config and writes CSV/JSON
//! outputs.
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 configuration
//! error, 3 degenerate statistical outcome, 4 failed self-check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use abc_rates::experiments::{run_experiment, write_outputs};
use abc_rates::{Error, ExperimentConfig, ExperimentReport, Outcome};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

const VERSION: &str = env!("ABC_RATES_VERSION");

#[derive(Parser)]
#[command(name = "abc-rates", version = VERSION, about = "Convergence-rate experiments for rejection ABC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior histograms against the limiting density, for each n.
    Shape(RunArgs),
    /// Plain and regression-adjusted posterior risk over a tolerance grid.
    Risk(RunArgs),
    /// Acceptance rate against n, compared with the predicted exponent.
    AcceptanceScaling(RunArgs),
    /// Rejection ABC against the brute-force grid posterior.
    OracleCheck(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "abc-rates-out")]
    out: PathBuf,
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Shape(a) => ("shape", a),
            Command::Risk(a) => ("risk", a),
            Command::AcceptanceScaling(a) => ("acceptance-scaling", a),
            Command::OracleCheck(a) => ("oracle-check", a),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    results: &'a ExperimentReport,
    runtime_seconds: f64,
    version: &'static str,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::Dimension { .. }
            | Error::Rank(_)
            | Error::UnsupportedRegime(_) => 2,
            Error::Degenerate(_)
            | Error::DegenerateDesign(_)
            | Error::InsufficientData { .. }
            | Error::Undefined(_)
            | Error::Domain(_) => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Reads the config, checks it matches the subcommand and applies flag
/// overrides before deserializing, so `--seed` can supply a missing seed.
fn load_config(experiment: &str, args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| {
        Failure::config(format!("{} is not valid JSON: {e}", args.config.display()))
    })?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Failure::config("config must be a JSON object"))?;
    match obj.get("experiment") {
        None => {
            obj.insert("experiment".into(), Value::from(experiment));
        }
        Some(Value::String(s)) if s == experiment => {}
        Some(other) => {
            return Err(Failure::config(format!(
                "config is for experiment {other}, but the subcommand is {experiment}"
            )))
        }
    }
    if let Some(seed) = args.seed {
        obj.insert("seed".into(), Value::from(seed));
    }
    if let Some(workers) = args.workers {
        obj.insert("workers".into(), Value::from(workers));
    }
    let config: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| Failure::config(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn run(experiment: &str, args: &RunArgs) -> Result<Outcome, Failure> {
    let config = load_config(experiment, args)?;
    let start = Instant::now();
    let output = run_experiment(&config)?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    for path in write_outputs(&output, &args.out)? {
        println!("wrote {}", path.display());
    }
    let summary_path = args.out.join("summary.json");
    abc_rates::io::write_json(
        &summary_path,
        &Summary {
            config: &config,
            results: &output.report,
            runtime_seconds,
            version: VERSION,
        },
    )?;
    println!("wrote {}", summary_path.display());
    report_outcome(&output.report, &args.out);
    Ok(output.report.outcome())
}

fn report_outcome(report: &ExperimentReport, out: &Path) {
    match report {
        ExperimentReport::Shape(r) => {
            for run in &r.runs {
                println!(
                    "n={}: ε={} accepted={} acceptance_rate={} L1={}",
                    run.n,
                    run.epsilon,
                    run.accepted,
                    run.acceptance_rate,
                    run.l1.map_or("n/a".to_owned(), |l| l.to_string())
                );
            }
        }
        ExperimentReport::Risk(r) => {
            println!("vanilla slope {}", r.vanilla_fit.slope);
            println!(
                "adjusted segments {} / {}, breakpoint 10^{}",
                r.adjusted_fit.slope_left, r.adjusted_fit.slope_right, r.adjusted_fit.breakpoint
            );
        }
        ExperimentReport::AcceptanceScaling(r) => {
            println!(
                "fitted slope {} vs predicted {} (tolerance {})",
                r.fit.map_or("n/a".to_owned(), |f| f.slope.to_string()),
                r.predicted_slope,
                r.tolerance
            );
        }
        ExperimentReport::OracleCheck(r) => {
            for run in &r.runs {
                println!("seed {}: L1 {}", run.seed, run.l1);
            }
        }
    }
    match report.outcome() {
        Outcome::Ok => {}
        Outcome::Degenerate => eprintln!(
            "degenerate outcome; see {}",
            out.join("summary.json").display()
        ),
        Outcome::CheckFailed => eprintln!(
            "self-check failed; see {}",
            out.join("summary.json").display()
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (experiment, args) = cli.command.parts();
    match run(experiment, args) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Degenerate) => ExitCode::from(3),
        Ok(Outcome::CheckFailed) => ExitCode::from(4),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
