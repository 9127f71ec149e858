use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rscd_core::formation::{sample_gs, simulate_gs_blur, simulate_rs, simulate_rscd, SynthesisKind};
use rscd_core::imagecore::{SequenceManifest, Transfer};
use rscd_core::tensor::TensorFile;
use serde::{Deserialize, Serialize};

use crate::manifest::{self, bit_depth, default_bit_depth, valid_centers, InputSpec, ModeSpec, ShutterSpec};
use crate::output::Staged;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Product {
    Rs,
    Blur,
    Rscd,
}

fn all_products() -> Vec<Product> {
    vec![Product::Rs, Product::Blur, Product::Rscd]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthManifest {
    pub input: InputSpec,
    #[serde(default)]
    pub transfer: Transfer,
    pub shutter: ShutterSpec,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default = "all_products")]
    pub outputs: Vec<Product>,
    /// Center times in seconds; default: every frame time whose row windows
    /// fit inside the sequence.
    #[serde(default)]
    pub centers_s: Option<Vec<f64>>,
    #[serde(default = "default_bit_depth")]
    pub bit_depth: u32,
    /// Also write every frame as an `.rstf` tensor.
    #[serde(default)]
    pub write_tensors: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FrameEntry {
    index: usize,
    t_s: f64,
    files: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    spec_version: &'static str,
    command: &'static str,
    input: &'a InputSpec,
    transfer: Transfer,
    bit_depth: u32,
    shutter: ShutterSpec,
    t_r_s: f64,
    t_e_s: f64,
    t_m_s: f64,
    mode: SynthesisKind,
    #[serde(rename = "S")]
    samples: usize,
    rows: usize,
    frames: Vec<FrameEntry>,
}

pub fn run(path: &Path, out_flag: Option<&Path>) -> anyhow::Result<bool> {
    let m = manifest::load::<SynthManifest>(path)?;
    let b = &m.body;
    let out_dir = m.output_dir(b.output_dir.as_deref(), out_flag)?;
    let shutter = b.shutter.params()?;
    let mode = b.mode.mode()?;
    let depth = bit_depth(b.bit_depth)?;
    if b.outputs.is_empty() {
        bail!("`outputs` lists no products");
    }
    let seq = b.input.load(&m, b.transfer)?;
    let centers = match &b.centers_s {
        Some(c) if c.is_empty() => bail!("`centers_s` is empty"),
        Some(c) => c.clone(),
        None => {
            let c = valid_centers(&seq, &shutter);
            if c.is_empty() {
                bail!(
                    "no frame time of the {}-frame sequence leaves room for {} rows at t_r = {} s and t_e = {} s",
                    seq.len(),
                    seq.height(),
                    shutter.t_r(),
                    shutter.t_e()
                );
            }
            c
        }
    };

    let mut staged = Staged::new();
    let mut frames = Vec::with_capacity(centers.len());
    let mut rs_names = Vec::new();
    for (j, &t) in centers.iter().enumerate() {
        let mut files = Vec::new();
        let mut put = |staged: &mut Staged, stem: &str, f: &rscd_core::Frame| -> anyhow::Result<()> {
            let name = format!("{stem}_{j:04}.png");
            staged.png(&name, f, b.transfer, depth)?;
            files.push(PathBuf::from(&name));
            if b.write_tensors {
                let name = format!("{stem}_{j:04}.rstf");
                staged.tensor(&name, &TensorFile::from(f));
                files.push(PathBuf::from(name));
            }
            Ok(())
        };
        let at = |what: &str| format!("center {j} (t = {t} s): {what}");
        let gs = sample_gs(&seq, t, &mode).with_context(|| at("ground truth"))?;
        put(&mut staged, "gs", &gs)?;
        for p in &b.outputs {
            let (stem, frame) = match p {
                Product::Rs => ("rs", simulate_rs(&seq, t, &shutter, &mode).with_context(|| at("rolling shutter"))?),
                Product::Blur => ("blur", simulate_gs_blur(&seq, t, &shutter, &mode).with_context(|| at("blur"))?),
                Product::Rscd => ("rscd", simulate_rscd(&seq, t, &shutter, &mode).with_context(|| at("combined"))?),
            };
            put(&mut staged, stem, &frame)?;
            if *p == Product::Rs {
                rs_names.push(PathBuf::from(format!("rs_{j:04}.png")));
            }
        }
        frames.push(FrameEntry { index: j, t_s: t, files });
    }

    // Evenly spaced rolling-shutter frames double as a sequence for rectify.
    if rs_names.len() >= 2 {
        let dt = centers[1] - centers[0];
        let even = dt > 0.0 && centers.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
        if even {
            staged.json(
                "rs_sequence.json",
                &SequenceManifest {
                    dt_s: dt,
                    t0_s: centers[0],
                    frames: rs_names,
                },
            )?;
        }
    }
    staged.json(
        "metadata.json",
        &Metadata {
            spec_version: SCHEMA_VERSION,
            command: "synth",
            input: &b.input,
            transfer: b.transfer,
            bit_depth: b.bit_depth,
            shutter: b.shutter,
            t_r_s: shutter.t_r(),
            t_e_s: shutter.t_e(),
            t_m_s: shutter.t_m(seq.height()),
            mode: mode.kind,
            samples: mode.samples_per_window,
            rows: seq.height(),
            frames,
        },
    )?;
    staged.commit(&out_dir)?;
    Ok(true)
}
