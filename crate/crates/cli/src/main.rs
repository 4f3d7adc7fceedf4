mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

/// Radial length estimation from HRRP sequences.
#[derive(Debug, Parser)]
#[command(name = "hrrp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Replaces `seeds` with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces `snr_list` with this single SNR in dB.
    #[arg(long)]
    snr: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            snr: self.snr,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a labelled dataset into `<out_dir>/dataset`.
    Simulate(Common),
    /// Write one GAF image per profile of a dataset plus an index.
    Encode {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 64)]
        side: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the configured network and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Existing dataset directory instead of synthesizing one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Test-split MRE of a checkpoint, or of the best-K threshold method.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run every method over every SNR and seed and export the tables.
    Compare(Common),
    /// Finite-difference gradient check of both network architectures.
    Gradcheck(Common),
}

/// Failure carrying its exit code: 2 configuration, 3 data or runtime,
/// 4 verification.
#[derive(Debug)]
pub enum CliError {
    Config { key: String, message: String },
    Runtime(String),
    Verification(String),
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        CliError::Runtime(message.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = |s: &str| s.replace('\n', " ");
        match self {
            CliError::Config { key, message } => {
                write!(f, "error kind=config key={} message={:?}", if key.is_empty() { "-" } else { key }, one_line(message))
            }
            CliError::Runtime(m) => write!(f, "error kind=runtime message={:?}", one_line(m)),
            CliError::Verification(m) => write!(f, "error kind=verification message={:?}", one_line(m)),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&config::RunConfig::load(c.config.as_deref(), &c.overrides())?),
        Command::Encode { dataset, side, out } => commands::encode(&dataset, side, &out),
        Command::Train { common, dataset } => commands::train(
            &config::RunConfig::load(common.config.as_deref(), &common.overrides())?,
            dataset.as_deref(),
        ),
        Command::Eval {
            common,
            dataset,
            checkpoint,
        } => commands::eval(
            &config::RunConfig::load(common.config.as_deref(), &common.overrides())?,
            dataset.as_deref(),
            checkpoint.as_deref(),
        ),
        Command::Compare(c) => commands::compare(&config::RunConfig::load(c.config.as_deref(), &c.overrides())?),
        Command::Gradcheck(c) => commands::gradcheck(&config::RunConfig::load(c.config.as_deref(), &c.overrides())?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("error kind=config key=- message={:?}", e.to_string().lines().next().unwrap_or_default());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
