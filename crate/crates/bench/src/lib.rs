//! Acceptance suite: each criterion builds synthetic data, runs the relevant
//! `rscd-core` modules (and, for the pipeline checks, the `rscd` commands)
//! and compares measured values against fixed thresholds.
//!
//! Reports hold no timings, so identical configurations give identical
//! report bytes. Wall-clock limits are enforced by the `acceptance` test
//! target.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub mod criteria;
pub mod oracles;
pub mod report;

pub use report::{Check, CriterionReport, Measurement, SuiteReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Seeds every random instance and scene texture.
    pub seed: u64,
    /// Random instances per gradient check.
    pub gradient_trials: usize,
    /// Multiplier on the true pan velocity handed to the global rectifier.
    /// `-1` (wrong readout direction) makes the round-trip criterion fail.
    pub rectify_velocity_scale: f64,
    /// Writes side-by-side PNG panels (input | rectified | ground truth).
    pub panels_dir: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            gradient_trials: 10,
            rectify_velocity_scale: 1.0,
            panels_dir: None,
        }
    }
}

/// Ids and titles, in run order.
pub const CRITERIA: [(u8, &str); 10] = [
    (1, "formation reduction chain"),
    (2, "oracle equivalence"),
    (3, "gradient fidelity"),
    (4, "flow accuracy"),
    (5, "rectification round trip"),
    (6, "kernel reductions"),
    (7, "calibration"),
    (8, "metrics"),
    (9, "striping phenomenon"),
    (10, "determinism"),
];

/// Wall-clock budget for each criterion, seconds.
pub fn runtime_limit_s(id: u8) -> f64 {
    match id {
        1 | 7 | 8 | 9 => 5.0,
        3 | 6 => 20.0,
        2 | 4 => 30.0,
        _ => 60.0,
    }
}

pub fn run_criterion(id: u8, cfg: &SuiteConfig) -> CriterionReport {
    let title = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("unknown criterion");
    let measured = match id {
        1 => criteria::formation::reduction_chain(cfg),
        2 => criteria::formation::oracle_equivalence(cfg),
        3 => criteria::gradients::fidelity(cfg),
        4 => criteria::flow::accuracy(cfg),
        5 => criteria::rectify::round_trip(cfg),
        6 => criteria::kernels::reductions(cfg),
        7 => criteria::calib::homography(cfg),
        8 => criteria::metrics::identities(cfg),
        9 => criteria::formation::striping(cfg),
        10 => criteria::rectify::determinism(cfg),
        _ => Err(anyhow::anyhow!("no criterion {id}")),
    };
    match measured {
        Ok(m) => CriterionReport::from_measurements(id, title, m),
        Err(e) => CriterionReport::failed(id, title, format!("{e:#}")),
    }
}

/// Runs every criterion in order.
pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let criteria: Vec<_> = CRITERIA.iter().map(|&(id, _)| run_criterion(id, cfg)).collect();
    SuiteReport {
        spec_version: rscd_cli::SCHEMA_VERSION.to_owned(),
        config: cfg.clone(),
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}
