//! `ril`: analyze a single parameter tuple, sample the reconstructed
//! fields, or sweep the admissible band.
//!
//! Exit codes: 0 when every check passes, 2 when the parameters fall
//! outside the proven regime or a check fails (reported, not crashed),
//! 1 on internal failure.

mod analyze;
mod field;
mod output;
mod sweep;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ril_core::integrator::Seed;

#[derive(Parser)]
#[command(name = "ril", version, about = "Self-similar radial gas-flow analyzer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline at one parameter tuple and write a report.
    Analyze(analyze::AnalyzeArgs),
    /// Sample the reconstructed physical fields on a (t, r) grid.
    Field(field::FieldArgs),
    /// Map flags across a (gamma, lambda) grid of parameter tuples.
    Sweep(sweep::SweepArgs),
}

/// The parameter tuple and curve seed shared by analyze and field.
#[derive(Args)]
struct ParamArgs {
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    n: u32,
    /// Adiabatic index, > 1.
    #[arg(long)]
    gamma: f64,
    /// Similarity exponent, > 1.
    #[arg(long)]
    lambda: f64,
    /// Seed slope C = ell * V of the curve through the origin.
    #[arg(long, conflicts_with = "vertical")]
    ell: Option<f64>,
    /// Seed the curve tangent to the C-axis (the default).
    #[arg(long)]
    vertical: bool,
    /// Similarity coordinate assigned to the lower sonic node.
    #[arg(long, default_value_t = 1.0)]
    x9: f64,
}

impl ParamArgs {
    fn seed(&self) -> Seed {
        match self.ell {
            Some(l) => Seed::Slope(l),
            None => Seed::Vertical,
        }
    }
}

/// Output and execution knobs shared by all subcommands.
#[derive(Args)]
struct RunArgs {
    /// Output directory (default: $RIL_OUT_DIR, then the working dir).
    #[arg(long)]
    out: Option<String>,
    /// Scale factor applied to every check tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads for the parallel stages (parallel builds).
    #[arg(long)]
    jobs: Option<usize>,
    /// TOML config with optional keys out, tol, jobs; flags win.
    #[arg(long)]
    config: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let run = match cli.cmd {
        Cmd::Analyze(a) => analyze::run(a),
        Cmd::Field(a) => field::run(a),
        Cmd::Sweep(a) => sweep::run(a),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::from(1)
        }
    }
}
