//! `gtgtrack` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 solver did
//! not converge under `--strict`, 4 I/O failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gtgtrack::graph::Sigma;
use gtgtrack::Error;

#[derive(Parser, Debug)]
#[command(name = "gtgtrack", version, about = "Multi-target tracking by graph transduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scenario directory with ground truth
    Synth(SynthArgs),
    /// Label detections of a scenario from a few annotated frames
    Track(TrackArgs),
    /// Score a tracking result against the scenario's ground truth
    Eval(EvalArgs),
    /// Repeat tracking over several labeled-frame counts and summarize
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output scenario directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub targets: Option<u32>,
    #[arg(long)]
    pub frames: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patch_width: Option<u32>,
    #[arg(long)]
    pub patch_height: Option<u32>,
    /// Hue distance between consecutive targets, default 1/targets
    #[arg(long)]
    pub hue_separation: Option<f64>,
    #[arg(long)]
    pub pixel_noise: Option<f64>,
    #[arg(long)]
    pub illumination_drift: Option<f64>,
    #[arg(long)]
    pub occlusion_rate: Option<f64>,
}

/// Solver settings shared by `track` and `sweep`.
#[derive(Args, Debug)]
pub struct SolverArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario directory
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Kernel bandwidth: `auto` (median distance) or a positive number
    #[arg(long, value_parser = parse_sigma)]
    pub sigma: Option<Sigma>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Track one target against everyone else
    #[arg(long)]
    pub target: Option<u32>,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Result JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub labeled_frames: Option<usize>,
    /// Exit with code 3 when the dynamics do not converge
    #[arg(long)]
    pub strict: bool,
    /// Directory for distance, affinity and normalized matrices as CSV
    #[arg(long)]
    pub export_graph: Option<PathBuf>,
    /// CSV file with the per-iteration payoff and strategy change
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Result JSON written by `track`
    #[arg(long)]
    pub result: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Report JSON path, standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score against the one-vs-rest truth; defaults to the result's own setting
    #[arg(long)]
    pub target: Option<u32>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Summary CSV path; the effective config goes next to it as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated labeled-frame counts
    #[arg(long, value_delimiter = ',')]
    pub labeled_frames: Option<Vec<usize>>,
    #[arg(long)]
    pub runs: Option<usize>,
}

fn parse_sigma(s: &str) -> Result<Sigma, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const IO: u8 = 4;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: Self::IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if let Error::MissingClass(class) = e {
            return Self::config(format!(
                "target {} has no detection in the labeled frames; use another seed or more labeled frames",
                class + 1
            ));
        }
        let code = match e {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::UnreadableImage { .. }
            | Error::MalformedAnnotation { .. } => Self::IO,
            _ => Self::CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Track(a) => commands::track(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gtgtrack: {e}");
            ExitCode::from(e.code)
        }
    }
}
