use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use rscd_cli::{Cli, Command};
use rscd_core::flowsolve::{solve_flow, SolverConfig};
use rscd_core::formation::{sample_gs, simulate_rs, SynthesisMode};
use rscd_core::imagecore::{save_image, BitDepth, Transfer};
use rscd_core::metrics::psnr;
use rscd_core::rectify::{rectify_global, rectify_with_flow, GlobalMotion};
use rscd_core::scene::{SceneKind, SyntheticScene};
use rscd_core::tensor::TensorFile;
use rscd_core::{Frame, ShutterParams};
use serde_json::json;

use crate::oracles::crop;
use crate::{Check, Measurement, SuiteConfig};

const SIZE: usize = 64;
const FPS: f64 = 50.0;
const T: f64 = 0.06;
const V: [f64; 2] = [300.0, 0.0];
/// Row readout for the round trip: 64 rows over 12.8 ms.
const T_R: f64 = 2e-4;

fn pan(cfg: &SuiteConfig) -> SyntheticScene {
    let mut s = SyntheticScene::new(SceneKind::Pan, SIZE, SIZE, FPS, 7);
    s.velocity = V;
    s.seed = cfg.seed;
    s
}

fn cli(command: Command, out: &Path, threads: Option<usize>) -> anyhow::Result<()> {
    let ok = rscd_cli::run(&Cli {
        command,
        out: Some(out.to_owned()),
        threads,
    })?;
    ensure!(ok, "command reported failure");
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> anyhow::Result<PathBuf> {
    fs::write(path, serde_json::to_vec_pretty(v)?)?;
    Ok(path.to_owned())
}

fn side_by_side(frames: &[&Frame]) -> anyhow::Result<Frame> {
    let (w, h, c) = (frames[0].width(), frames[0].height(), frames[0].channels());
    Ok(Frame::from_fn(w * frames.len(), h, c, |x, y, ch| frames[x / w].get(x % w, y, ch))?)
}

/// Constant horizontal pan skewed by up to 2 px: global rectification with
/// the configured velocity, flow-driven rectification, and the full
/// `rectify` command on three consecutive 16-bit frames.
pub fn round_trip(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let seq = pan(cfg).sequence()?;
    let shutter = ShutterParams::new(T_R, 0.0)?;
    let mode = SynthesisMode::default();
    let dt = 1.0 / FPS;
    let rs = simulate_rs(&seq, T, &shutter, &mode)?;
    let gs = sample_gs(&seq, T, &mode)?;
    // Rows shift by at most |v| t_m; keep clear of the columns that leave.
    let b = (V[0].hypot(V[1]) * shutter.t_m(SIZE)).ceil() as usize + 2;
    let score = |f: &Frame| psnr(&crop(f, b), &crop(&gs, b), 1.0);

    let s = cfg.rectify_velocity_scale;
    let global = rectify_global(&rs, &GlobalMotion::new(V[0] * s, V[1] * s)?, &shutter)?;
    let oracle = rectify_global(&rs, &GlobalMotion::new(V[0], V[1])?, &shutter)?;
    let rs_next = simulate_rs(&seq, T + dt, &shutter, &mode)?;
    let (flow, _) = solve_flow(&rs_next, &rs, &SolverConfig::default())?;
    let est = rectify_with_flow(&rs, &flow, dt, &shutter)?;

    let dir = tempfile::tempdir()?;
    let names = ["prev.png", "cur.png", "next.png"];
    for (name, t) in names.iter().zip([T - dt, T, T + dt]) {
        save_image(&simulate_rs(&seq, t, &shutter, &mode)?, dir.path().join(name), Transfer::Linear, BitDepth::Sixteen)?;
    }
    let manifest = write_json(
        &dir.path().join("rectify.json"),
        &json!({
            "current": "cur.png", "previous": "prev.png", "next": "next.png",
            "transfer": "linear", "dt_s": dt,
            "shutter": {"t_r_us": T_R * 1e6, "t_e_ms": 0.0}
        }),
    )?;
    let out = dir.path().join("out");
    cli(Command::Rectify { manifest }, &out, None)?;
    let piped = TensorFile::read(out.join("rectified.rstf"))?.to_frame()?;

    if let Some(p) = &cfg.panels_dir {
        fs::create_dir_all(p)?;
        let panel = side_by_side(&[&rs, &global.frame, &piped, &gs])?;
        save_image(&panel, p.join("rectify_round_trip.png"), Transfer::Linear, BitDepth::Eight)?;
    }

    let p_global = score(&global.frame)?;
    let p_oracle = score(&oracle.frame)?;
    let p_flow = score(&est.frame)?;
    let p_rs = score(&rs)?;
    let p_piped = score(&piped)?;
    Ok(vec![
        Measurement::new("input_psnr_db", p_rs, Check::Ge(0.0)),
        Measurement::new("global_psnr_db", p_global, Check::Gt(40.0)),
        Measurement::new("flow_gap_to_oracle_db", p_oracle - p_flow, Check::Le(2.0)),
        Measurement::new("pipeline_gain_db", p_piped - p_rs, Check::Ge(3.0)),
    ])
}

fn snapshot(dir: &Path) -> anyhow::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let e = e?;
        files.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path())?);
    }
    Ok(files)
}

/// Files whose bytes differ from the first run, plus files missing on
/// either side.
fn differing(runs: &[BTreeMap<String, Vec<u8>>]) -> usize {
    let first = &runs[0];
    runs[1..]
        .iter()
        .map(|r| {
            let changed = first.iter().filter(|(k, v)| r.get(*k) != Some(*v)).count();
            changed + r.keys().filter(|k| !first.contains_key(*k)).count()
        })
        .sum()
}

/// `synth` and `rectify` twice at four threads and once at one.
pub fn determinism(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let dir = tempfile::tempdir()?;
    let mut scene = serde_json::to_value(pan(cfg))?;
    scene["channels"] = json!(3);
    let synth = write_json(
        &dir.path().join("synth.json"),
        &json!({
            "input": {"scene": scene}, "transfer": "linear",
            "shutter": {"t_r_us": 200.0, "t_e_ms": 4.0}, "write_tensors": true
        }),
    )?;
    let threads = [1usize, 4, 4];
    let mut synth_runs = vec![];
    for (i, &n) in threads.iter().enumerate() {
        let out = dir.path().join(format!("synth{i}"));
        cli(Command::Synth { manifest: synth.clone() }, &out, Some(n))?;
        synth_runs.push(snapshot(&out)?);
    }
    let rectify = write_json(
        &dir.path().join("synth0/rectify.json"),
        &json!({
            "current": "rs_0001.png", "previous": "rs_0000.png", "next": "rs_0002.png",
            "transfer": "linear", "dt_s": 1.0 / FPS,
            "shutter": {"t_r_us": 200.0, "t_e_ms": 4.0}
        }),
    )?;
    let mut rectify_runs = vec![];
    for (i, &n) in threads.iter().enumerate() {
        let out = dir.path().join(format!("rectify{i}"));
        cli(Command::Rectify { manifest: rectify.clone() }, &out, Some(n))?;
        rectify_runs.push(snapshot(&out)?);
    }
    Ok(vec![
        Measurement::new("synth_files", synth_runs[0].len() as f64, Check::Ge(1.0)),
        Measurement::new("synth_differing_files", differing(&synth_runs) as f64, Check::Le(0.0)),
        Measurement::new("rectify_files", rectify_runs[0].len() as f64, Check::Ge(1.0)),
        Measurement::new("rectify_differing_files", differing(&rectify_runs) as f64, Check::Le(0.0)),
    ])
}
