use std::path::{Path, PathBuf};

use anyhow::Context;
use rscd_core::flowsolve::{solve_flow, SolveReport, SolverConfig};
use rscd_core::imagecore::{load_image, Transfer};
use rscd_core::tensor::TensorFile;
use serde::{Deserialize, Serialize};

use crate::manifest;
use crate::output::Staged;
use crate::SCHEMA_VERSION;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowManifest {
    /// Image sampled by the field: the result satisfies `a(q + D(q)) ≈ b(q)`.
    pub a: PathBuf,
    /// Reference grid of the field.
    pub b: PathBuf,
    #[serde(default)]
    pub transfer: Transfer,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    spec_version: &'static str,
    width: usize,
    height: usize,
    mean_magnitude_px: f64,
    solver: &'a SolverConfig,
    #[serde(flatten)]
    report: &'a SolveReport,
}

pub fn run(path: &Path, out_flag: Option<&Path>) -> anyhow::Result<bool> {
    let m = manifest::load::<FlowManifest>(path)?;
    let b = &m.body;
    let out_dir = m.output_dir(b.output_dir.as_deref(), out_flag)?;
    b.solver.validate()?;
    let load = |p: &Path| {
        let p = m.resolve(p);
        load_image(&p, b.transfer).with_context(|| format!("loading {}", p.display()))
    };
    let (ia, ib) = (load(&b.a)?, load(&b.b)?);
    let (field, report) = solve_flow(&ia, &ib, &b.solver)?;
    let mut staged = Staged::new();
    staged.tensor("flow.rstf", &TensorFile::from(&field));
    staged.json(
        "report.json",
        &Report {
            spec_version: SCHEMA_VERSION,
            width: field.width(),
            height: field.height(),
            mean_magnitude_px: field.mean_magnitude(),
            solver: &b.solver,
            report: &report,
        },
    )?;
    staged.commit(&out_dir)?;
    Ok(true)
}
