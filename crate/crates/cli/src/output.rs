//! Resolution of output directory, tolerance scale, and worker count
//! from flags, an optional config file, and the environment.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use crate::RunArgs;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out: Option<String>,
    tol: Option<f64>,
    jobs: Option<usize>,
}

pub struct RunContext {
    pub out_dir: PathBuf,
    /// Multiplier on every check tolerance; 1 keeps the defaults.
    pub tol_scale: f64,
}

/// Flags win over the config file; the config wins over RIL_OUT_DIR.
pub fn resolve(args: &RunArgs) -> Result<RunContext> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {path}"))?;
            toml::from_str::<FileConfig>(&text)
                .with_context(|| format!("parsing config {path}"))?
        }
        None => FileConfig::default(),
    };
    let out_dir = args
        .out
        .clone()
        .or(file.out)
        .or_else(|| std::env::var("RIL_OUT_DIR").ok())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let tol_scale = args.tol.or(file.tol).unwrap_or(1.0);
    anyhow::ensure!(
        tol_scale.is_finite() && tol_scale > 0.0,
        "tolerance scale must be a positive number"
    );

    if let Some(jobs) = args.jobs.or(file.jobs) {
        configure_pool(jobs)?;
    }
    Ok(RunContext { out_dir, tol_scale })
}

#[cfg(feature = "parallel")]
fn configure_pool(jobs: usize) -> Result<()> {
    anyhow::ensure!(jobs > 0, "--jobs must be at least 1");
    // a second configuration attempt in one process is harmless: the
    // pool is already running, results do not depend on its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_pool(_jobs: usize) -> Result<()> {
    Ok(())
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
