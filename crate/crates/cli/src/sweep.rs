//! Map relevance, barrier flags, and optionally the shock-locus verdict
//! over a (gamma, lambda) grid at fixed dimension.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;

use ril_core::hugoniot::{hugoniot_locus, intersection_test, Verdict};
use ril_core::integrator::{assemble_gamma, barrier_check, Seed};
use ril_core::par::par_map;
use ril_core::params::{is_relevant, lambda_thresholds, GasParams};

use crate::output;
use crate::RunArgs;

#[derive(Args)]
pub struct SweepArgs {
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1.05)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 20)]
    pub gamma_steps: usize,
    /// Lambda samples per gamma, spread inside (1, the admissible bound).
    #[arg(long, default_value_t = 20)]
    pub lambda_steps: usize,
    /// Also assemble the curve and record the shock-locus verdict where
    /// the cheap flags allow it.
    #[arg(long)]
    pub full: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

pub const SWEEP_CSV_HEADER: &str = "n,gamma,lambda,relevant,prop_a,prop_b,prop_c,verdict,min_gap";

const MAX_GRID: usize = 1_000_000;
const BATCH: usize = 64;

fn fmt_flag(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "na",
    }
}

/// One grid point; every fallible stage degrades to "na" so a bad corner
/// of the grid cannot abort the sweep.
fn row(n: u32, gamma: f64, lambda: f64, full: bool) -> String {
    let mut relevant = None;
    let mut props = [None, None, None];
    let mut verdict = None;
    if let Ok(p) = GasParams::isentropic(n, gamma, lambda) {
        relevant = is_relevant(n, gamma, lambda).ok();
        if let Ok(b) = barrier_check(&p) {
            props = [Some(b.prop_a), Some(b.prop_b), Some(b.prop_c)];
            if full && relevant == Some(true) && b.prop_a && b.prop_b && b.prop_c {
                verdict = assemble_gamma(&p, Seed::Vertical, 1.0).ok().and_then(|g| {
                    let locus = hugoniot_locus(&g.lower_sigma, &p).ok()?;
                    intersection_test(&g, &locus, &p).ok()
                });
            }
        }
    }
    let (word, gap) = match verdict {
        Some(Verdict::NoIntersection { min_gap }) => {
            ("no_intersection", format!("{min_gap:.14e}"))
        }
        Some(Verdict::Intersection { .. }) => ("intersection", "na".to_string()),
        None => ("na", "na".to_string()),
    };
    format!(
        "{n},{gamma:.14e},{lambda:.14e},{},{},{},{},{word},{gap}",
        fmt_flag(relevant),
        fmt_flag(props[0]),
        fmt_flag(props[1]),
        fmt_flag(props[2]),
    )
}

pub fn run(args: SweepArgs) -> Result<u8> {
    let ctx = output::resolve(&args.run)?;
    anyhow::ensure!(
        args.gamma_steps >= 1 && args.lambda_steps >= 1,
        "grid needs at least one point per axis"
    );
    anyhow::ensure!(
        args.gamma_steps.saturating_mul(args.lambda_steps) <= MAX_GRID,
        "grid exceeds {MAX_GRID} points"
    );
    anyhow::ensure!(
        args.gamma_min > 1.0 && args.gamma_max >= args.gamma_min,
        "gamma range must sit above 1"
    );

    let mut tasks = Vec::with_capacity(args.gamma_steps * args.lambda_steps);
    for i in 0..args.gamma_steps {
        let gamma = if args.gamma_steps == 1 {
            args.gamma_min
        } else {
            args.gamma_min
                + (args.gamma_max - args.gamma_min) * i as f64 / (args.gamma_steps - 1) as f64
        };
        let top = match lambda_thresholds(args.n, gamma) {
            Ok(t) => t.lambda_circ,
            Err(e) => {
                eprintln!("{}", json!({ "error": e.to_string() }));
                return Ok(2);
            }
        };
        for j in 0..args.lambda_steps {
            let frac = (j + 1) as f64 / (args.lambda_steps + 1) as f64;
            tasks.push((gamma, 1.0 + frac * (top - 1.0)));
        }
    }

    let path = ctx.out_dir.join("sweep.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    out.flush()?;
    // row order is fixed by the task list, not by worker scheduling, and
    // each batch lands on disk before the next starts
    for chunk in tasks.chunks(BATCH) {
        let rows = par_map(chunk, |&(g, l)| row(args.n, g, l, args.full));
        for r in &rows {
            writeln!(out, "{r}")?;
        }
        out.flush()?;
    }
    println!("{}", json!({ "csv": path, "rows": tasks.len() }));
    Ok(0)
}
