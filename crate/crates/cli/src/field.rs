//! Sample the reconstructed physical fields on a (t, r) grid.

use anyhow::Result;
use clap::Args;
use serde_json::json;

use ril_core::flowfield::{write_field_csv, FieldEvaluator, FlowError};
use ril_core::integrator::assemble_gamma;
use ril_core::params::{is_relevant, GasParams};

use crate::output::{self, log_grid};
use crate::{ParamArgs, RunArgs};

#[derive(Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Times to sample, comma separated; empty writes a header-only file.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub t: Vec<f64>,
    /// Smallest radius in the logarithmic grid.
    #[arg(long, default_value_t = 1e-6)]
    pub r_min: f64,
    /// Largest radius in the logarithmic grid.
    #[arg(long, default_value_t = 1e3)]
    pub r_max: f64,
    /// Radii per time slice.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn run(args: FieldArgs) -> Result<u8> {
    let ctx = output::resolve(&args.run)?;
    anyhow::ensure!(
        args.r_min > 0.0 && args.r_max > args.r_min && args.samples >= 2,
        "radius grid needs 0 < r-min < r-max and at least 2 samples"
    );

    let pa = &args.params;
    let params = match GasParams::isentropic(pa.n, pa.gamma, pa.lambda) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string() }));
            return Ok(2);
        }
    };
    if !is_relevant(pa.n, pa.gamma, pa.lambda)? {
        eprintln!("{}", json!({ "error": "parameters outside the relevant band" }));
        return Ok(2);
    }

    let gamma = assemble_gamma(&params, pa.seed(), pa.x9)?;
    let ev = FieldEvaluator::new(&gamma, &params)?;
    let rs = log_grid(args.r_min, args.r_max, args.samples);

    let mut rows = Vec::with_capacity(args.t.len() * rs.len());
    let mut skipped = 0usize;
    for &t in &args.t {
        for &r in &rs {
            match ev.state(t, r) {
                Ok(sample) => rows.push(sample),
                Err(FlowError::AtSingularity) => skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }

    let mut csv = Vec::new();
    write_field_csv(&mut csv, &rows)?;
    let path = output::write_file(&ctx.out_dir, "field.csv", &csv)?;
    if skipped > 0 {
        eprintln!("{}", json!({ "skipped": skipped }));
    }
    println!("{}", json!({ "csv": path, "rows": rows.len(), "skipped": skipped }));
    Ok(0)
}
