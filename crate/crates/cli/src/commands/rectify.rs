use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rscd_core::flowsolve::{solve_flow, SolveReport, SolverConfig};
use rscd_core::imagecore::{load_image, Transfer};
use rscd_core::rectify::{align_neighbor, fuse_aligned, rectify_with_flow, Neighbor};
use rscd_core::tensor::TensorFile;
use rscd_core::warp::{DisplacementField, ValidityMask};
use rscd_core::Frame;
use serde::{Deserialize, Serialize};

use crate::manifest::{self, bit_depth, default_bit_depth, ShutterSpec};
use crate::output::Staged;
use crate::SCHEMA_VERSION;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectifyManifest {
    pub current: PathBuf,
    #[serde(default)]
    pub previous: Option<PathBuf>,
    #[serde(default)]
    pub next: Option<PathBuf>,
    /// Precomputed flow with `current(q) ≈ next(q + flow(q))`, `.rstf`.
    #[serde(default)]
    pub flow_next: Option<PathBuf>,
    /// Same for the previous frame.
    #[serde(default)]
    pub flow_prev: Option<PathBuf>,
    #[serde(default)]
    pub transfer: Transfer,
    pub dt_s: f64,
    pub shutter: ShutterSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_bit_depth")]
    pub bit_depth: u32,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RowOffsets<'a> {
    spec_version: &'static str,
    rows: usize,
    t_r_s: f64,
    t_m_s: f64,
    row_offsets_s: &'a [f64],
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    spec_version: &'static str,
    command: &'static str,
    dt_s: f64,
    shutter: ShutterSpec,
    primary_coverage: f64,
    previous_coverage: Option<f64>,
    next_coverage: Option<f64>,
    flow_next_source: &'static str,
    flow_next_report: Option<&'a SolveReport>,
    flow_prev_source: Option<&'static str>,
    flow_prev_report: Option<&'a SolveReport>,
}

fn read_field(path: &Path, like: &Frame) -> anyhow::Result<DisplacementField> {
    let f = TensorFile::read(path)
        .and_then(|t| t.to_field())
        .with_context(|| format!("reading flow {}", path.display()))?;
    if f.width() != like.width() || f.height() != like.height() {
        bail!(
            "flow {} is {}x{}, frames are {}x{}",
            path.display(),
            f.width(),
            f.height(),
            like.width(),
            like.height()
        );
    }
    Ok(f)
}

pub fn run(path: &Path, out_flag: Option<&Path>) -> anyhow::Result<bool> {
    let m = manifest::load::<RectifyManifest>(path)?;
    let b = &m.body;
    let out_dir = m.output_dir(b.output_dir.as_deref(), out_flag)?;
    let shutter = b.shutter.params()?;
    let depth = bit_depth(b.bit_depth)?;
    b.solver.validate()?;
    if !(b.dt_s > 0.0 && b.dt_s.is_finite()) {
        bail!("`dt_s` must be positive, got {}", b.dt_s);
    }
    if b.next.is_none() && b.flow_next.is_none() {
        bail!("missing next frame: provide `next` or a precomputed `flow_next`");
    }
    if b.flow_prev.is_some() && b.previous.is_none() {
        bail!("`flow_prev` given without `previous`");
    }

    let load = |p: &Path| -> anyhow::Result<Frame> {
        let p = m.resolve(p);
        load_image(&p, b.transfer).with_context(|| format!("loading {}", p.display()))
    };
    let current = load(&b.current)?;
    let next = b.next.as_deref().map(load).transpose()?;
    let previous = b.previous.as_deref().map(load).transpose()?;
    for f in next.iter().chain(previous.iter()) {
        if !f.same_shape(&current) {
            bail!(
                "neighbor is {}x{}x{}, current frame is {}x{}x{}",
                f.width(),
                f.height(),
                f.channels(),
                current.width(),
                current.height(),
                current.channels()
            );
        }
    }

    let (flow_next, next_report, next_source) = match (&b.flow_next, &next) {
        (Some(p), _) => (read_field(&m.resolve(p), &current)?, None, "file"),
        (None, Some(n)) => {
            let (f, r) = solve_flow(n, &current, &b.solver).context("estimating flow to the next frame")?;
            (f, Some(r), "solved")
        }
        (None, None) => unreachable!(),
    };
    let (flow_prev, prev_report, prev_source) = match (&b.flow_prev, &previous) {
        (Some(p), _) => (Some(read_field(&m.resolve(p), &current)?), None, Some("file")),
        (None, Some(pf)) => {
            let (f, r) = solve_flow(pf, &current, &b.solver).context("estimating flow to the previous frame")?;
            (Some(f), Some(r), Some("solved"))
        }
        (None, None) => (None, None, None),
    };

    let primary = rectify_with_flow(&current, &flow_next, b.dt_s, &shutter)?;
    let absent = || (Frame::zeros(current.width(), current.height(), current.channels()), ValidityMask::zeros(current.width(), current.height()));
    let aligned_next = match &next {
        Some(n) => Some(align_neighbor(n, &flow_next, b.dt_s, &shutter, Neighbor::Next)?),
        None => None,
    };
    let aligned_prev = match (&previous, &flow_prev) {
        (Some(p), Some(f)) => Some(align_neighbor(p, f, b.dt_s, &shutter, Neighbor::Previous)?),
        _ => None,
    };
    let (zf, zm) = absent();
    let zf = zf?;
    let pick = |a: &Option<(Frame, ValidityMask)>| -> (Frame, ValidityMask) {
        a.clone().unwrap_or_else(|| (zf.clone(), zm.clone()))
    };
    let (pf, pm) = pick(&aligned_prev);
    let (nf, nm) = pick(&aligned_next);
    let fused = fuse_aligned(&primary, (&pf, &pm), (&nf, &nm))?;

    let mut staged = Staged::new();
    staged.png("rectified.png", &fused, b.transfer, depth)?;
    staged.tensor("rectified.rstf", &TensorFile::from(&fused));
    staged.tensor("mask.rstf", &TensorFile::from(&primary.mask));
    staged.tensor("flow_next.rstf", &TensorFile::from(&flow_next));
    if let Some(f) = &flow_prev {
        staged.tensor("flow_prev.rstf", &TensorFile::from(f));
    }
    staged.json(
        "row_offsets.json",
        &RowOffsets {
            spec_version: SCHEMA_VERSION,
            rows: current.height(),
            t_r_s: shutter.t_r(),
            t_m_s: shutter.t_m(current.height()),
            row_offsets_s: &primary.row_offsets,
        },
    )?;
    staged.json(
        "metadata.json",
        &Metadata {
            spec_version: SCHEMA_VERSION,
            command: "rectify",
            dt_s: b.dt_s,
            shutter: b.shutter,
            primary_coverage: primary.mask.coverage(),
            previous_coverage: aligned_prev.as_ref().map(|a| a.1.coverage()),
            next_coverage: aligned_next.as_ref().map(|a| a.1.coverage()),
            flow_next_source: next_source,
            flow_next_report: next_report.as_ref(),
            flow_prev_source: prev_source,
            flow_prev_report: prev_report.as_ref(),
        },
    )?;
    staged.commit(&out_dir)?;
    Ok(true)
}
