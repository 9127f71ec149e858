//! Manifest types shared by the subcommands. Unknown keys are rejected and
//! relative paths resolve against the manifest's own directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rscd_core::formation::{SynthesisKind, SynthesisMode, DEFAULT_SAMPLES};
use rscd_core::imagecore::BitDepth;
use rscd_core::ShutterParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A parsed manifest and the directory its relative paths refer to.
pub struct Loaded<T> {
    pub body: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base.join(p)
        }
    }

    /// `--out` wins over the manifest's `output_dir`.
    pub fn output_dir(&self, from_manifest: Option<&Path>, flag: Option<&Path>) -> anyhow::Result<PathBuf> {
        match (flag, from_manifest) {
            (Some(f), _) => Ok(f.to_owned()),
            (None, Some(m)) => Ok(self.resolve(m)),
            (None, None) => bail!("no output directory: set `output_dir` in the manifest or pass --out"),
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Loaded<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let body = serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))?;
    let base = path.parent().map(Path::to_owned).unwrap_or_default();
    Ok(Loaded { body, base })
}

/// Shutter timing in the units cameras are usually specified in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShutterSpec {
    /// Readout offset between consecutive rows, microseconds.
    pub t_r_us: f64,
    /// Exposure duration, milliseconds.
    pub t_e_ms: f64,
}

impl ShutterSpec {
    pub fn params(&self) -> anyhow::Result<ShutterParams> {
        ShutterParams::new(self.t_r_us * 1e-6, self.t_e_ms * 1e-3).context("invalid shutter")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub kind: SynthesisKind,
    #[serde(default)]
    pub samples: Option<usize>,
}

impl Default for ModeSpec {
    fn default() -> Self {
        Self {
            kind: SynthesisKind::Interpolate,
            samples: None,
        }
    }
}

impl ModeSpec {
    pub fn mode(&self) -> anyhow::Result<SynthesisMode> {
        Ok(match self.kind {
            SynthesisKind::Interpolate => SynthesisMode::interpolate(self.samples.unwrap_or(DEFAULT_SAMPLES))?,
            SynthesisKind::Rowcopy => SynthesisMode::rowcopy(),
        })
    }
}

pub fn default_bit_depth() -> u32 {
    16
}

pub fn bit_depth(bits: u32) -> anyhow::Result<BitDepth> {
    Ok(BitDepth::from_bits(bits)?)
}

/// Where a synthesis run gets its global-shutter frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// Path to a sequence manifest (`dt_s`, `t0_s`, `frames`).
    Sequence(PathBuf),
    /// A procedural scene rendered in memory.
    Scene(rscd_core::scene::SyntheticScene),
}

impl InputSpec {
    pub fn load<T>(
        &self,
        m: &Loaded<T>,
        transfer: rscd_core::imagecore::Transfer,
    ) -> anyhow::Result<rscd_core::FrameSequence> {
        match self {
            InputSpec::Sequence(p) => {
                let path = m.resolve(p);
                rscd_core::imagecore::load_sequence(&path, transfer)
                    .with_context(|| format!("loading sequence {}", path.display()))
            }
            InputSpec::Scene(s) => Ok(s.sequence()?),
        }
    }
}

/// Frame times whose every row window, exposure included, lies inside the
/// sequence.
pub fn valid_centers(seq: &rscd_core::FrameSequence, shutter: &ShutterParams) -> Vec<f64> {
    let rows = seq.height();
    let tol = 1e-9 * seq.dt();
    (0..seq.len())
        .map(|k| seq.time_of(k))
        .filter(|&t| {
            let first = shutter.row_time(t, 0, rows) - shutter.t_e() / 2.0;
            let last = shutter.row_time(t, rows - 1, rows) + shutter.t_e() / 2.0;
            first.min(t - shutter.t_e() / 2.0) >= seq.t0() - tol && last.max(t + shutter.t_e() / 2.0) <= seq.t_end() + tol
        })
        .collect()
}
