use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ncr_core::data::SynthSpec;

mod commands;
mod config;

use config::{RunConfig, SynthFlags, TuneFlags, UsageError};

#[derive(Debug, Parser)]
#[command(name = "ncr", version, about = "Regression with chaotic-neuron Tracemean features")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug); RUST_LOG overrides
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic linear dataset (columns x,y) to CSV
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
        slope: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        intercept: f64,
        /// Noise variance
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        /// Default: $NCR_SEED, then 42
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune and evaluate one model on one dataset
    Benchmark {
        /// CSV file with a header row
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Target column of --dataset
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        synth: SynthFlags,
        #[command(flatten)]
        tune: TuneFlags,
    },
    /// Run every model, baseline and augmented, on the 24 synthetic datasets
    Matrix {
        #[command(flatten)]
        tune: TuneFlags,
        /// Restrict to these models (comma-separated)
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Restrict to these dataset sizes (comma-separated)
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Merge report.json files and recompute CSVs and the boost table
    Report {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            n,
            slope,
            intercept,
            variance,
            seed,
            out,
        } => {
            let synth = SynthFlags {
                n: Some(n),
                slope: Some(slope),
                intercept: Some(intercept),
                variance: Some(variance),
            };
            let tune = TuneFlags {
                seed,
                ..Default::default()
            };
            let rc = RunConfig::resolve(&tune, &synth, None, None)?;
            let spec: SynthSpec = match rc.source {
                Some(config::DataSource::Synthetic(s)) => s,
                _ => unreachable!("generate always describes a synthetic source"),
            };
            commands::generate(&spec, &out)
        }
        Command::Benchmark {
            dataset,
            target,
            synth,
            tune,
        } => {
            let rc = RunConfig::resolve(&tune, &synth, dataset, target)?;
            log::debug!("{rc:?}");
            commands::benchmark(&rc)
        }
        Command::Matrix { tune, models, sizes } => {
            let rc = RunConfig::resolve(&tune, &SynthFlags::default(), None, None)?;
            if rc.source.is_some() {
                return Err(config::usage("matrix generates its own datasets; drop dataset options"));
            }
            let filter = commands::MatrixFilter {
                models: commands::parse_models(&models)?,
                sizes,
            };
            commands::matrix(&rc, &filter)
        }
        Command::Report { inputs, out } => commands::report(&inputs, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
