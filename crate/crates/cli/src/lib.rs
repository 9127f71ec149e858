//! `rscd`: JSON-manifest driven batch workflows over `rscd-core`.
//!
//! Every subcommand reads one manifest, validates it and computes all of its
//! results in memory, and only then creates the output directory and writes
//! files. A run that fails validation leaves nothing behind.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod manifest;
pub mod output;

/// Value of the `spec_version` field in every JSON document written.
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Parser)]
#[command(name = "rscd", version, about = "Rolling-shutter synthesis, rectification and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory; overrides the manifest's `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Never changes output bytes.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize rolling-shutter, blurred and combined frames.
    Synth { manifest: PathBuf },
    /// Estimate dense displacement between two images.
    Flow { manifest: PathBuf },
    /// Rectify a rolling-shutter frame using its neighbors.
    Rectify { manifest: PathBuf },
    /// PSNR/SSIM over image pairs.
    Eval { manifest: PathBuf },
    /// Homography or color-matrix calibration.
    Calib { manifest: PathBuf },
    /// Brute-force reference rendering of combined frames (slow).
    Oracle { manifest: PathBuf },
}

/// Runs one subcommand. `Ok(false)` means it completed but some requested
/// item failed or a quality threshold was missed.
pub fn run(cli: &Cli) -> anyhow::Result<bool> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be at least 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building thread pool")?;
    pool.install(|| {
        let out = cli.out.as_deref();
        match &cli.command {
            Command::Synth { manifest } => commands::synth::run(manifest, out),
            Command::Flow { manifest } => commands::flow::run(manifest, out),
            Command::Rectify { manifest } => commands::rectify::run(manifest, out),
            Command::Eval { manifest } => commands::eval::run(manifest, out),
            Command::Calib { manifest } => commands::calib::run(manifest, out),
            Command::Oracle { manifest } => commands::oracle::run(manifest, out),
        }
    })
}
