use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nastya_core::harness::{load_spec, run_experiment, run_sweep, verify, ExperimentSpec, RunOptions, Suite, SweepAxis};
use nastya_core::theory::StatsOptions;
use nastya_core::{Error, HeterogeneityStats};

/// Simulator and verification suite for two-stepsize federated optimization
/// with random reshuffling.
#[derive(Parser)]
#[command(name = "nastya", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Base seed; seed i of the ensemble is base + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV and JSON output.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Number of seeds.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seed ensemble and write traces, summary and metadata.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sweep one parameter with paired seeds.
    Sweep {
        spec: PathBuf,
        /// cstep, sstep, cohort or alpha.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run built-in verification checks; exits non-zero on any failure.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Print heterogeneity statistics of the spec's problem as JSON.
    Stats { spec: PathBuf },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Parse { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_FAILURE),
    }
}

fn load(path: &PathBuf, o: &Overrides) -> Result<(ExperimentSpec, RunOptions), Error> {
    let mut spec = load_spec(path)?;
    if let Some(seed) = o.seed {
        spec.seed = seed;
    }
    if let Some(e) = o.ensemble {
        if e == 0 {
            return Err(Error::Config("--ensemble must be >= 1".into()));
        }
        spec.ensemble = e;
    }
    Ok((spec, RunOptions { out_dir: Some(o.out_dir.clone()), threads: o.threads }))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { spec, overrides } => {
            let (spec, options) = load(&spec, &overrides)?;
            let out = run_experiment(&spec, &options)?;
            let s = &out.summary;
            println!("{} seeds, {} diverged, {} files written", s.seeds.len(), s.diverged, out.files.len());
            for c in &s.checks {
                match &c.error {
                    Some(e) => println!("bound {}: not applicable ({e})", c.theorem.name()),
                    None => println!(
                        "bound {}: {} ({} violating rounds)",
                        c.theorem.name(),
                        if c.satisfied() { "holds" } else { "violated" },
                        c.violations.len()
                    ),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { spec, axis, values, overrides } => {
            let axis = SweepAxis::from_name(&axis)
                .ok_or_else(|| Error::Config(format!("unknown axis `{axis}` (cstep, sstep, cohort, alpha)")))?;
            let (spec, options) = load(&spec, &overrides)?;
            let out = run_sweep(&spec, axis, &values, &options)?;
            for p in &out.points {
                match &p.outcome {
                    Ok(s) => println!("{} = {}: ok, {} diverged", axis.name(), p.value, s.diverged),
                    Err(e) => println!("{} = {}: skipped ({e})", axis.name(), p.value),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let suite = Suite::from_name(&suite).ok_or_else(|| {
                Error::Config(format!("unknown suite `{suite}` (one of {})", Suite::NAMES.join(", ")))
            })?;
            let report = verify(suite);
            for c in &report.checks {
                println!("{c}");
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
        }
        Command::Stats { spec } => {
            let spec = load_spec(&spec)?;
            let problem = spec.problem.build()?;
            let stats = HeterogeneityStats::of(&problem, StatsOptions::default())?;
            let json = serde_json::json!({
                "clients": problem.num_clients(),
                "samples_per_client": problem.samples_per_client(),
                "dim": problem.dim(),
                "smoothness": problem.smoothness(),
                "strong_convexity": problem.strong_convexity(),
                "f_star": problem.optimal_value(),
                "participation_factor": stats.participation_factor(spec.cohort),
                "stats": stats,
            });
            println!("{}", serde_json::to_string_pretty(&json).map_err(|e| Error::Resource(e.to_string()))?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
