//! Command-line front end: dataset generation, reference solves, certification,
//! training runs and report tables.

pub mod commands;
pub mod config;
pub mod container;
pub mod table;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use container::{read_dataset, write_dataset, Checkpoint, Dataset, DatasetInfo, DatasetManifest};
pub use table::ReportRow;

/// Exit code of numeric failures (divergence, non-convergence, invalid data).
pub const EXIT_FAILURE: i32 = 1;
/// Exit code of usage errors (bad flags, unknown config keys, invalid settings).
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Format(String),
    Numeric(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Format(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Format(_) | CliError::Numeric(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Format(m) => write!(f, "format error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<astral::Error> for CliError {
    fn from(e: astral::Error) -> Self {
        match e {
            astral::Error::Parameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "astral", version, about = "Guaranteed error bounds for elliptic problems and the networks that learn them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set operator.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-sample work.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of elliptic problems.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        family: Option<String>,
        /// Grid level: `2^J + 1` nodes per axis.
        #[arg(long = "J")]
        level: Option<u32>,
        /// Number of samples.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Append reference solutions to a dataset.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Certify approximate solutions by optimising the majorant.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a physics-informed network on a manufactured problem.
    TrainPinn {
        #[command(flatten)]
        common: Common,
    },
    /// Train a neural operator on a dataset.
    TrainOp {
        #[command(flatten)]
        common: Common,
        /// Training dataset.
        #[arg(long)]
        data: PathBuf,
        /// Test dataset.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Merge metrics files into one table sorted by equation and training size.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("astral: {e}");
            e.exit_code()
        }
    }
}
