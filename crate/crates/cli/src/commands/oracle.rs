use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rscd_core::formation::oracle_rscd;
use rscd_core::imagecore::Transfer;
use rscd_core::tensor::TensorFile;
use serde::{Deserialize, Serialize};

use crate::manifest::{self, bit_depth, default_bit_depth, valid_centers, InputSpec, ShutterSpec};
use crate::output::Staged;
use crate::SCHEMA_VERSION;

fn default_samples() -> usize {
    1024
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleManifest {
    pub input: InputSpec,
    #[serde(default)]
    pub transfer: Transfer,
    pub shutter: ShutterSpec,
    #[serde(default)]
    pub centers_s: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples_dense: usize,
    #[serde(default = "default_bit_depth")]
    pub bit_depth: u32,
    #[serde(default)]
    pub write_tensors: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    spec_version: &'static str,
    command: &'static str,
    input: &'a InputSpec,
    shutter: ShutterSpec,
    samples_dense: usize,
    centers_s: &'a [f64],
    files: Vec<PathBuf>,
}

pub fn run(path: &Path, out_flag: Option<&Path>) -> anyhow::Result<bool> {
    let m = manifest::load::<OracleManifest>(path)?;
    let b = &m.body;
    let out_dir = m.output_dir(b.output_dir.as_deref(), out_flag)?;
    let shutter = b.shutter.params()?;
    let depth = bit_depth(b.bit_depth)?;
    let seq = b.input.load(&m, b.transfer)?;
    let centers = match &b.centers_s {
        Some(c) if !c.is_empty() => c.clone(),
        Some(_) => bail!("`centers_s` is empty"),
        None => valid_centers(&seq, &shutter),
    };
    if centers.is_empty() {
        bail!("no valid center time in the sequence");
    }
    let mut staged = Staged::new();
    let mut files = Vec::new();
    for (j, &t) in centers.iter().enumerate() {
        let f = oracle_rscd(&seq, t, &shutter, b.samples_dense).with_context(|| format!("center {j} (t = {t} s)"))?;
        let name = format!("oracle_{j:04}.png");
        staged.png(&name, &f, b.transfer, depth)?;
        files.push(PathBuf::from(name));
        if b.write_tensors {
            let name = format!("oracle_{j:04}.rstf");
            staged.tensor(&name, &TensorFile::from(&f));
            files.push(PathBuf::from(name));
        }
    }
    staged.json(
        "metadata.json",
        &Metadata {
            spec_version: SCHEMA_VERSION,
            command: "oracle",
            input: &b.input,
            shutter: b.shutter,
            samples_dense: b.samples_dense,
            centers_s: &centers,
            files,
        },
    )?;
    staged.commit(&out_dir)?;
    Ok(true)
}
