//! Command-line front end: one subcommand per pipeline stage plus `verify`.
//!
//! Every stage reads the same TOML configuration; a handful of flags
//! override the most commonly varied keys. `DRIFTFIELD_WORKERS` caps the
//! rayon pool and is the only environment knob.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use driftfield::catalog::IndexLevel;
use driftfield::config::{self, RunConfig};
use driftfield::pipeline::{self, RunPaths, StageOutcome};
use driftfield::verify;
use driftfield::{Error, Result};

/// Exit status for a missing or unreadable dataset path.
const EXIT_NO_DATASET: u8 = 2;

#[derive(Parser)]
#[command(
    name = "driftfield",
    version,
    about = "Epoch-partitioned co-occurrence maps, drift detection, and force-field summaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the catalog, slice it into epochs, and write vocabulary statistics
    Ingest(StageArgs),
    /// Run every analysis lane over the persisted epochs and write the report
    Analyze(StageArgs),
    /// Recompute drift logs and anchored coordinates from stored BMU maps
    Drift(StageArgs),
    /// Recompute force and potential artifacts from stored maps and scores
    Field(StageArgs),
    /// Re-render heatmaps and histograms and rebuild the manifest
    Report(StageArgs),
    /// Run the oracle and invariant suites, plus dataset checks when a run exists
    Verify(VerifyArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Run configuration file
    #[arg(long, default_value = "driftfield.toml")]
    config: PathBuf,
    /// Override the dataset path
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the indexing levels (comma-separated: level1,level2,level3,all)
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<String>>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Ingest and analyze first so the dataset checks have artifacts to read
    #[arg(long)]
    full: bool,
}

fn main() -> ExitCode {
    if let Some(workers) = config::worker_count() {
        // Must precede any rayon use; a second global build would fail.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("driftfield: cannot size the worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("driftfield: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest(args) => {
            let config = load_config(&args)?;
            if let Some(code) = reject_missing_dataset(&config) {
                return Ok(code);
            }
            let summary = pipeline::run_ingest(&config)?;
            let stats = RunPaths::new(&config.output_dir)
                .ingest_dir()
                .join(pipeline::STATS_TEXT);
            print!("{}", std::fs::read_to_string(&stats).map_err(|e| Error::Io {
                path: stats.clone(),
                source: e,
            })?);
            println!(
                "parsed {} records ({} skipped), {} timestamped; epochs under {}",
                summary.parsed,
                summary.skipped,
                summary.timestamped,
                config.output_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(args) => {
            let config = load_config(&args)?;
            let summary = pipeline::run_analyze(&config)?;
            for outcome in &summary.outcomes {
                match (&outcome.summary, &outcome.error) {
                    (Some(lane), _) => println!(
                        "{}: {} epochs, {} drift events, mean rate {:.1}%, anchor {:?}",
                        lane.lane, lane.epochs, lane.drift_events, lane.mean_drift_rate, lane.anchor_term
                    ),
                    (None, Some(e)) => println!("{}: FAILED: {e}", outcome.lane),
                    (None, None) => {}
                }
            }
            println!("manifest: {} files", summary.manifest_files);
            Ok(if summary.failed_lanes() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Drift(args) => {
            let config = load_config(&args)?;
            stage_exit(&pipeline::run_drift(&config)?)
        }
        Command::Field(args) => {
            let config = load_config(&args)?;
            stage_exit(&pipeline::run_field(&config)?)
        }
        Command::Report(args) => {
            let config = load_config(&args)?;
            let (outcomes, bundle) = pipeline::run_report(&config)?;
            let code = stage_exit(&outcomes)?;
            println!("manifest: {} files", bundle.entries.len());
            Ok(code)
        }
        Command::Verify(args) => {
            let config = load_config(&args.stage)?;
            if args.full {
                if let Some(code) = reject_missing_dataset(&config) {
                    return Ok(code);
                }
                pipeline::run_ingest(&config)?;
                let analyzed = pipeline::run_analyze(&config)?;
                if analyzed.failed_lanes() > 0 {
                    eprintln!("driftfield: {} lane(s) failed during analyze", analyzed.failed_lanes());
                }
            }
            let mut results = verify::run_fixture_suites();
            results.extend(verify::run_dataset_checks(&config));
            print!("{}", verify::format_results(&results));
            Ok(if verify::all_passed(&results) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

/// Loads the configuration and applies flag overrides. A missing file at the
/// default path falls back to built-in defaults so `--dataset`-only runs work.
fn load_config(args: &StageArgs) -> Result<RunConfig> {
    let mut config = if args.config.is_file() {
        RunConfig::load(&args.config)?
    } else if args.config == PathBuf::from("driftfield.toml") {
        RunConfig::default()
    } else {
        return Err(Error::Config(format!(
            "configuration file {} not found",
            args.config.display()
        )));
    };
    if let Some(dataset) = &args.dataset {
        config.dataset.source = dataset.clone();
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(levels) = &args.levels {
        config.levels = levels
            .iter()
            .map(|s| IndexLevel::from_str(s))
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(config)
}

fn reject_missing_dataset(config: &RunConfig) -> Option<ExitCode> {
    let source = &config.dataset.source;
    if source.as_os_str().is_empty() {
        eprintln!("driftfield: no dataset configured; set dataset.source or pass --dataset");
        return Some(ExitCode::from(EXIT_NO_DATASET));
    }
    if !source.is_file() {
        eprintln!("driftfield: dataset not found: {}", source.display());
        return Some(ExitCode::from(EXIT_NO_DATASET));
    }
    None
}

fn stage_exit(outcomes: &[StageOutcome]) -> Result<ExitCode> {
    let mut ok = true;
    for outcome in outcomes {
        if outcome.ok {
            println!("{}: {}", outcome.lane, outcome.detail);
        } else {
            ok = false;
            println!("{}: FAILED: {}", outcome.lane, outcome.detail);
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
