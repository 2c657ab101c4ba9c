//! Command-line driver: corpus synthesis, feature extraction, training,
//! scoring, evaluation and filter-response export.
//!
//! [`run`] holds the whole program so tests can drive it in-process; the
//! binary only forwards its arguments and exit code.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fastaudio::Error;

pub use config::{RunConfig, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DATASET: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("config: {0}")]
    Config(String),
    #[error("score/protocol mismatch: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                Error::Io { .. } => EXIT_IO,
                Error::EmptyDataset
                | Error::SingleClassDataset(_)
                | Error::EmptyScores(_)
                | Error::MalformedLine { .. }
                | Error::NotRiff
                | Error::UnsupportedFormat(_)
                | Error::TruncatedFile(_)
                | Error::InvalidWaveform(_)
                | Error::SignalTooShort { .. }
                | Error::SampleRateMismatch { .. } => EXIT_DATASET,
                _ => EXIT_OTHER,
            },
            CliError::Mismatch(_) => EXIT_MISMATCH,
            CliError::Config(_) | CliError::Usage(_) => EXIT_OTHER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fastaudio",
    version,
    about = "Learnable filterbank front-end for spoof detection"
)]
struct Cli {
    /// Config file with one `key=value` per line; `#` starts a comment.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// fixed, fastaudio-tri, fastaudio-gauss or fastaudio-sort.
    #[arg(long, global = true, value_name = "NAME")]
    variant: Option<String>,
    /// Seed for corpus synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic train/eval corpus.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Dump the log filterbank features of one WAV file.
    Extract {
        wav: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Use this model's front-end instead of the configured Mel init.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train on `<DATA_DIR>/train` and write a checkpoint.
    Train {
        data_dir: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Score every utterance of `<DATA_DIR>/eval` with a checkpoint.
    Score {
        checkpoint: PathBuf,
        data_dir: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Print EER, min t-DCF and the EER threshold for a score file.
    Eval {
        scores: PathBuf,
        protocol: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Write the filter responses and their sum as CSV.
    ExportFilters {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply_text(&text)?;
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(v) = &cli.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = effective_config(&cli)?;
    if cli.print_config {
        write!(out, "{}", cfg.to_text()).map_err(|e| Error::io("<stdout>", e))?;
        return Ok(());
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Usage("no command given; see --help".into()))?;
    match command {
        Command::Synth { out: dir } => commands::synth(&cfg, &dir, out),
        Command::Extract {
            wav,
            out: path,
            checkpoint,
        } => commands::extract(&cfg, &wav, checkpoint.as_deref(), &path),
        Command::Train {
            data_dir,
            out: path,
        } => commands::train(&cfg, &data_dir, &path, out),
        Command::Score {
            checkpoint,
            data_dir,
            out: path,
        } => commands::score(&checkpoint, &data_dir, &path),
        Command::Eval {
            scores,
            protocol,
            beta,
        } => commands::eval(&scores, &protocol, beta.unwrap_or(cfg.beta), out),
        Command::ExportFilters {
            checkpoint,
            out: path,
        } => commands::export_filters(&cfg, checkpoint.as_deref(), &path),
    }
}

/// Runs the program with `args` (including the program name) and returns
/// its exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let _ = write!(err, "{e}");
            return EXIT_OTHER;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
