//! `esprd` command-line front end: simulate → prep → train → evaluate → report,
//! plus decision-surface and histogram exports for plotting elsewhere.

pub mod artifacts;
mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use esprd_core::metrics::EvalMode;
use esprd_core::Error;

pub use commands::run;

/// Exit codes. clap's own usage errors exit with 2.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 3;
    pub const DATA: u8 = 4;
    pub const FIT: u8 = 5;
    pub const EVAL: u8 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "esprd", version, about = "Qubit-state discrimination for ESP readout")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Multi,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Single => EvalMode::Single,
            ModeArg::Multi => EvalMode::Multi,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Experiment manifest (JSON).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory. Precedence: this flag, then the manifest, then $ESPRD_OUT_DIR.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the manifest seed and the device seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated subset of models, e.g. `gnb,qda,fnn`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the labelled shot dataset.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides `shots_per_state`.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Remove outliers, split and fit the scaler.
    Prep {
        #[command(flatten)]
        common: Common,
        /// Train,test,validation fractions, e.g. `0.5,0.3,0.2`.
        #[arg(long, value_delimiter = ',')]
        split: Option<Vec<f64>>,
        #[arg(long)]
        contamination: Option<f64>,
        /// Dataset to read instead of `<out>/dataset.csv`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit every listed model on the training split.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score the fitted models on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Predicted labels over an I-Q grid for one qubit.
    DecisionSurface {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0)]
        qubit: usize,
        /// `lo,hi` along I; defaults to the scaler mean ± 4 std.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        i_range: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q_range: Option<Vec<f64>>,
        /// Cells along I and Q.
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 100])]
        cells: Vec<usize>,
    },
    /// Binned I and Q marginals of one single-qubit prepared state.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        qubit: usize,
        #[arg(long, default_value_t = 0)]
        state: u8,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Combined fidelity and timing tables from existing reports.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
}

impl Failure {
    pub fn new(code: u8, error: Error) -> Self {
        // configuration problems keep their own code whatever stage hit them
        let code = if matches!(error, Error::Config { .. }) { exit::CONFIG } else { code };
        Failure { code, error }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { exit::OK });
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli.command, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
