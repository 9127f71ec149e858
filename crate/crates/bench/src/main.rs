use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use rscd_bench::{run_suite, SuiteConfig};

/// Runs the acceptance suite and writes a JSON report.
#[derive(Debug, Parser)]
#[command(name = "rscd-bench", version)]
struct Args {
    /// Suite configuration (JSON); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<bool> {
    let args = Args::parse();
    let cfg: SuiteConfig = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("invalid config {}", p.display()))?,
        None => SuiteConfig::default(),
    };
    let report = run_suite(&cfg);
    for c in &report.criteria {
        eprintln!("{}", c.summary());
    }
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(report.passed)
}
