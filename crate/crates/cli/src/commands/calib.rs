use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rscd_core::calib::{estimate_color_matrix, estimate_homography, read_patches, ColorMatrix, Correspondences, Homography};
use serde::{Deserialize, Serialize};

use crate::manifest;
use crate::output::Staged;
use crate::SCHEMA_VERSION;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibManifest {
    /// CSV with header `sx,sy,tx,ty`.
    #[serde(default)]
    pub correspondences: Option<PathBuf>,
    /// CSV with header `mr,mg,mb,rr,rg,rb`.
    #[serde(default)]
    pub patches: Option<PathBuf>,
    /// Residual above which the run fails. Homographies default to 1 px;
    /// color fits have no default threshold.
    #[serde(default)]
    pub max_rms: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct HomographyOut {
    spec_version: &'static str,
    homography: Homography,
    rms_px: f64,
    max_rms_px: f64,
    pairs: usize,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct ColorOut {
    spec_version: &'static str,
    color_matrix: ColorMatrix,
    rms: f64,
    max_rms: Option<f64>,
    patches: usize,
    passed: bool,
}

pub fn run(path: &Path, out_flag: Option<&Path>) -> anyhow::Result<bool> {
    let m = manifest::load::<CalibManifest>(path)?;
    let b = &m.body;
    let out_dir = m.output_dir(b.output_dir.as_deref(), out_flag)?;
    if let Some(t) = b.max_rms {
        if !(t >= 0.0 && t.is_finite()) {
            bail!("`max_rms` must be a non-negative number, got {t}");
        }
    }
    let mut staged = Staged::new();
    let passed = match (&b.correspondences, &b.patches) {
        (Some(c), None) => {
            let p = m.resolve(c);
            let pairs = Correspondences::from_csv(&p).with_context(|| format!("reading {}", p.display()))?;
            let (h, rms) = estimate_homography(&pairs)?;
            let max = b.max_rms.unwrap_or(1.0);
            let passed = rms <= max;
            staged.json(
                "homography.json",
                &HomographyOut {
                    spec_version: SCHEMA_VERSION,
                    homography: h,
                    rms_px: rms,
                    max_rms_px: max,
                    pairs: pairs.len(),
                    passed,
                },
            )?;
            if !passed {
                eprintln!("error: homography RMS {rms:.4} px exceeds {max} px");
            }
            passed
        }
        (None, Some(c)) => {
            let p = m.resolve(c);
            let (measured, reference) = read_patches(&p).with_context(|| format!("reading {}", p.display()))?;
            let (cm, rms) = estimate_color_matrix(&measured, &reference)?;
            let passed = b.max_rms.is_none_or(|t| rms <= t);
            staged.json(
                "color_matrix.json",
                &ColorOut {
                    spec_version: SCHEMA_VERSION,
                    color_matrix: cm,
                    rms,
                    max_rms: b.max_rms,
                    patches: measured.len(),
                    passed,
                },
            )?;
            if !passed {
                eprintln!("error: color RMS {rms:.6} exceeds {}", b.max_rms.unwrap_or_default());
            }
            passed
        }
        _ => bail!("set exactly one of `correspondences` and `patches`"),
    };
    staged.commit(&out_dir)?;
    Ok(passed)
}
