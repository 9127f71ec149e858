use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rscd_core::imagecore::{load_image, Transfer};
use rscd_core::metrics::{ser_db, MetricReport};
use serde::{Deserialize, Serialize};

use crate::manifest;
use crate::output::Staged;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    /// Reference image.
    pub a: PathBuf,
    /// Image under test; row discontinuity is measured on it.
    pub b: PathBuf,
}

fn linear() -> Transfer {
    Transfer::Linear
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalManifest {
    pub pairs: Vec<PairSpec>,
    /// Decoding applied before comparison. `linear` compares stored values.
    #[serde(default = "linear")]
    pub transfer: Transfer,
    #[serde(default)]
    pub row_discontinuity: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct PairResult<'a> {
    #[serde(flatten)]
    pair: &'a PairSpec,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Mean {
    #[serde(serialize_with = "ser_db")]
    psnr_db: f64,
    ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    row_discontinuity: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    spec_version: &'static str,
    transfer: Transfer,
    evaluated: usize,
    failed: usize,
    mean: Option<Mean>,
    pairs: Vec<PairResult<'a>>,
}

pub fn run(path: &Path, out_flag: Option<&Path>) -> anyhow::Result<bool> {
    let m = manifest::load::<EvalManifest>(path)?;
    let b = &m.body;
    let out_dir = m.output_dir(b.output_dir.as_deref(), out_flag)?;
    if b.pairs.is_empty() {
        bail!("`pairs` is empty: nothing to evaluate");
    }
    let eval_pair = |p: &PairSpec| -> anyhow::Result<MetricReport> {
        let load = |q: &Path| {
            let q = m.resolve(q);
            load_image(&q, b.transfer).with_context(|| format!("loading {}", q.display()))
        };
        let (a, c) = (load(&p.a)?, load(&p.b)?);
        Ok(MetricReport::compute(&a, &c, b.row_discontinuity)?)
    };
    let mut results = Vec::with_capacity(b.pairs.len());
    let mut ok = Vec::new();
    for (i, p) in b.pairs.iter().enumerate() {
        match eval_pair(p) {
            Ok(r) => {
                ok.push(r.clone());
                results.push(PairResult { pair: p, metrics: Some(r), error: None });
            }
            Err(e) => {
                eprintln!("warning: pair {i} ({} vs {}): {e:#}", p.a.display(), p.b.display());
                results.push(PairResult { pair: p, metrics: None, error: Some(format!("{e:#}")) });
            }
        }
    }
    let mean = (!ok.is_empty()).then(|| {
        let n = ok.len() as f64;
        Mean {
            psnr_db: ok.iter().map(|r| r.psnr_db).sum::<f64>() / n,
            ssim: ok.iter().map(|r| r.ssim).sum::<f64>() / n,
            row_discontinuity: b
                .row_discontinuity
                .then(|| ok.iter().filter_map(|r| r.row_discontinuity).sum::<f64>() / n),
        }
    });
    let failed = b.pairs.len() - ok.len();
    let mut staged = Staged::new();
    staged.json(
        "metrics.json",
        &Report {
            spec_version: SCHEMA_VERSION,
            transfer: b.transfer,
            evaluated: ok.len(),
            failed,
            mean,
            pairs: results,
        },
    )?;
    staged.commit(&out_dir)?;
    if failed > 0 {
        eprintln!("warning: {failed} of {} pairs failed", b.pairs.len());
    }
    Ok(failed == 0)
}
