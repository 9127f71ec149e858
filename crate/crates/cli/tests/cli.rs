use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rscd_core::imagecore::{save_image, BitDepth, Transfer};
use rscd_core::metrics::psnr;
use rscd_core::tensor::TensorFile;
use rscd_core::Frame;
use serde_json::{json, Value};
use tempfile::TempDir;

fn rscd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rscd")).args(args).output().expect("spawn rscd")
}

fn write_manifest(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run_ok(cmd: &str, manifest: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, manifest.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = rscd(&args);
    assert!(out.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn frame(p: &Path) -> Frame {
    TensorFile::read(p).unwrap().to_frame().unwrap()
}

fn max_abs_diff(a: &Frame, b: &Frame) -> f32 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

fn crop(f: &Frame, b: usize) -> Frame {
    Frame::from_fn(f.width() - 2 * b, f.height() - 2 * b, f.channels(), |x, y, c| f.get(x + b, y + b, c)).unwrap()
}

fn pan_scene() -> Value {
    json!({
        "kind": "pan", "width": 64, "height": 64, "fps": 50.0, "frames": 7,
        "velocity": [150.0, 0.0], "seed": 5
    })
}

fn synth_manifest(t_r_us: f64, t_e_ms: f64) -> Value {
    json!({
        "input": {"scene": pan_scene()},
        "transfer": "linear",
        "shutter": {"t_r_us": t_r_us, "t_e_ms": t_e_ms},
        "write_tensors": true
    })
}

#[test]
fn synth_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(tmp.path(), "synth.json", &synth_manifest(200.0, 4.0));
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        run_ok("synth", &m, &["--out", out.to_str().unwrap(), "--threads", threads]);
        outputs.push(read_dir_bytes(&out));
    }
    assert!(outputs[0].contains_key("rscd_0000.png"));
    assert!(outputs[0].contains_key("rs_sequence.json"));
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let meta = read_json(&tmp.path().join("run0/metadata.json"));
    assert_eq!(meta["spec_version"], "1.0");
    assert_eq!(meta["S"], 16);
}

#[test]
fn instantaneous_shutter_reproduces_the_source() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(tmp.path(), "synth.json", &synth_manifest(0.0, 0.0));
    let out = tmp.path().join("out");
    run_ok("synth", &m, &["--out", out.to_str().unwrap()]);
    let meta = read_json(&out.join("metadata.json"));
    let n = meta["frames"].as_array().unwrap().len();
    assert_eq!(n, 7);
    for j in 0..n {
        let gs = frame(&out.join(format!("gs_{j:04}.rstf")));
        for stem in ["rs", "blur", "rscd"] {
            let f = frame(&out.join(format!("{stem}_{j:04}.rstf")));
            assert!(max_abs_diff(&f, &gs) <= 1e-6, "{stem} frame {j}");
        }
    }
}

#[test]
fn validation_failures_leave_no_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let mut bad = synth_manifest(200.0, 0.0);
    bad["surprise"] = json!(1);
    let m = write_manifest(tmp.path(), "unknown.json", &bad);
    let r = rscd(&["synth", m.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("surprise"));
    assert!(!out.exists());

    // Row 0 of a frame centered at t = 0 starts before the first frame.
    let mut early = synth_manifest(200.0, 0.0);
    early["centers_s"] = json!([0.0]);
    let m = write_manifest(tmp.path(), "early.json", &early);
    let r = rscd(&["synth", m.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("row 0"), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());

    let m = write_manifest(tmp.path(), "noout.json", &synth_manifest(200.0, 0.0));
    let r = rscd(&["synth", m.to_str().unwrap()]);
    assert!(!r.status.success());
}

fn write_png(dir: &Path, name: &str, f: &Frame) -> PathBuf {
    let p = dir.join(name);
    save_image(f, &p, Transfer::Linear, BitDepth::Sixteen).unwrap();
    p
}

fn ramp(w: usize, h: usize, offset: f32) -> Frame {
    Frame::from_fn(w, h, 1, |x, y, _| 0.2 + 0.3 * x as f32 / w as f32 + 0.2 * y as f32 / h as f32 + offset).unwrap()
}

#[test]
fn eval_reports_inf_and_twenty_db() {
    let tmp = TempDir::new().unwrap();
    write_png(tmp.path(), "a.png", &ramp(32, 24, 0.0));
    write_png(tmp.path(), "b.png", &ramp(32, 24, 0.1));
    let m = write_manifest(
        tmp.path(),
        "eval.json",
        &json!({"pairs": [{"a": "a.png", "b": "a.png"}, {"a": "a.png", "b": "b.png"}], "output_dir": "out"}),
    );
    run_ok("eval", &m, &[]);
    let r = read_json(&tmp.path().join("out/metrics.json"));
    assert_eq!(r["pairs"][0]["psnr_db"], "inf");
    let p = r["pairs"][1]["psnr_db"].as_f64().unwrap();
    assert!((p - 20.0).abs() < 0.01, "{p}");
    assert_eq!(r["failed"], 0);
}

#[test]
fn eval_rejects_empty_and_flags_partial_failure() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(tmp.path(), "empty.json", &json!({"pairs": [], "output_dir": "empty"}));
    assert!(!rscd(&["eval", m.to_str().unwrap()]).status.success());
    assert!(!tmp.path().join("empty").exists());

    write_png(tmp.path(), "a.png", &ramp(16, 16, 0.0));
    let m = write_manifest(
        tmp.path(),
        "partial.json",
        &json!({"pairs": [{"a": "a.png", "b": "a.png"}, {"a": "a.png", "b": "missing.png"}], "output_dir": "partial"}),
    );
    let r = rscd(&["eval", m.to_str().unwrap()]);
    assert!(!r.status.success());
    let rep = read_json(&tmp.path().join("partial/metrics.json"));
    assert_eq!(rep["evaluated"], 1);
    assert_eq!(rep["failed"], 1);
    assert!(rep["pairs"][1]["error"].is_string());
}

#[test]
fn calib_identity_and_too_few_pairs() {
    let tmp = TempDir::new().unwrap();
    let pts = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (5.0, 3.0), (2.0, 7.0)];
    let mut csv = String::from("sx,sy,tx,ty\n");
    for (x, y) in pts {
        csv += &format!("{x},{y},{x},{y}\n");
    }
    fs::write(tmp.path().join("id.csv"), &csv).unwrap();
    let m = write_manifest(tmp.path(), "id.json", &json!({"correspondences": "id.csv", "output_dir": "id"}));
    run_ok("calib", &m, &[]);
    let r = read_json(&tmp.path().join("id/homography.json"));
    assert!(r["rms_px"].as_f64().unwrap() < 1e-9);
    for i in 0..3 {
        for j in 0..3 {
            let v = r["homography"][i][j].as_f64().unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "H[{i}][{j}] = {v}");
        }
    }

    let three: String = csv.lines().take(4).map(|l| format!("{l}\n")).collect();
    fs::write(tmp.path().join("three.csv"), three).unwrap();
    let m = write_manifest(tmp.path(), "three.json", &json!({"correspondences": "three.csv", "output_dir": "three"}));
    let r = rscd(&["calib", m.to_str().unwrap()]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("insufficient"));
    assert!(!tmp.path().join("three").exists());
}

#[test]
fn calib_threshold_breach_exits_nonzero_with_report() {
    let tmp = TempDir::new().unwrap();
    let csv = "sx,sy,tx,ty\n0,0,0,0\n10,0,10,0\n10,10,10,10\n0,10,0,10\n5,5,9,1\n";
    fs::write(tmp.path().join("bad.csv"), csv).unwrap();
    let m = write_manifest(tmp.path(), "bad.json", &json!({"correspondences": "bad.csv", "output_dir": "bad"}));
    let r = rscd(&["calib", m.to_str().unwrap()]);
    assert!(!r.status.success());
    let rep = read_json(&tmp.path().join("bad/homography.json"));
    assert_eq!(rep["passed"], false);
    assert!(rep["rms_px"].as_f64().unwrap() > 1.0);
}

#[test]
fn rectify_static_triple_is_identity() {
    let tmp = TempDir::new().unwrap();
    let f = Frame::from_fn(40, 32, 1, |x, y, _| {
        0.5 + 0.2 * (x as f32 * 0.4).sin() * (y as f32 * 0.3).cos()
    })
    .unwrap();
    write_png(tmp.path(), "f.png", &f);
    let m = write_manifest(
        tmp.path(),
        "r.json",
        &json!({
            "current": "f.png", "previous": "f.png", "next": "f.png",
            "transfer": "linear", "dt_s": 0.02,
            "shutter": {"t_r_us": 300.0, "t_e_ms": 0.0},
            "output_dir": "out"
        }),
    );
    run_ok("rectify", &m, &[]);
    let out = tmp.path().join("out");
    let cur = rscd_core::imagecore::load_image(tmp.path().join("f.png"), Transfer::Linear).unwrap();
    let r = frame(&out.join("rectified.rstf"));
    assert!(max_abs_diff(&r, &cur) <= 1e-3, "{}", max_abs_diff(&r, &cur));
    let offs = read_json(&out.join("row_offsets.json"));
    assert_eq!(offs["row_offsets_s"].as_array().unwrap().len(), 32);
}

#[test]
fn rectify_with_zero_flow_tensor_is_identity() {
    let tmp = TempDir::new().unwrap();
    let f = ramp(24, 20, 0.0);
    write_png(tmp.path(), "f.png", &f);
    let zero = rscd_core::warp::DisplacementField::zeros(24, 20).unwrap();
    TensorFile::from(&zero).write(tmp.path().join("zero.rstf")).unwrap();
    let m = write_manifest(
        tmp.path(),
        "r.json",
        &json!({
            "current": "f.png", "flow_next": "zero.rstf", "transfer": "linear", "dt_s": 0.02,
            "shutter": {"t_r_us": 300.0, "t_e_ms": 0.0}, "output_dir": "out"
        }),
    );
    run_ok("rectify", &m, &[]);
    let r = frame(&tmp.path().join("out/rectified.rstf"));
    let cur = rscd_core::imagecore::load_image(tmp.path().join("f.png"), Transfer::Linear).unwrap();
    assert!(max_abs_diff(&r, &cur) <= 1e-6);

    let m = write_manifest(
        tmp.path(),
        "alone.json",
        &json!({"current": "f.png", "dt_s": 0.02, "shutter": {"t_r_us": 300.0, "t_e_ms": 0.0}, "output_dir": "alone"}),
    );
    let r = rscd(&["rectify", m.to_str().unwrap()]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing next frame"));
    assert!(!tmp.path().join("alone").exists());
}

#[test]
fn synth_then_rectify_improves_psnr() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(tmp.path(), "synth.json", &synth_manifest(200.0, 0.0));
    let syn = tmp.path().join("syn");
    run_ok("synth", &m, &["--out", syn.to_str().unwrap()]);
    let seq = read_json(&syn.join("rs_sequence.json"));
    let dt = seq["dt_s"].as_f64().unwrap();
    assert!((dt - 0.02).abs() < 1e-12);
    let r = write_manifest(
        &syn,
        "rectify.json",
        &json!({
            "current": "rs_0002.png", "previous": "rs_0001.png", "next": "rs_0003.png",
            "transfer": "linear", "dt_s": dt,
            "shutter": {"t_r_us": 200.0, "t_e_ms": 0.0}, "output_dir": "rect"
        }),
    );
    run_ok("rectify", &r, &[]);
    let gs = frame(&syn.join("gs_0002.rstf"));
    let rs = frame(&syn.join("rs_0002.rstf"));
    let fixed = frame(&syn.join("rect/rectified.rstf"));
    // Rows move by at most 150 px/s * 6.4 ms.
    let b = 3;
    let before = psnr(&crop(&rs, b), &crop(&gs, b), 1.0).unwrap();
    let after = psnr(&crop(&fixed, b), &crop(&gs, b), 1.0).unwrap();
    assert!(after >= before + 3.0, "{before} dB -> {after} dB");
}

#[test]
fn flow_and_oracle_write_their_products() {
    let tmp = TempDir::new().unwrap();
    let a = ramp(32, 32, 0.0);
    write_png(tmp.path(), "a.png", &a);
    let m = write_manifest(tmp.path(), "flow.json", &json!({"a": "a.png", "b": "a.png", "output_dir": "flow"}));
    run_ok("flow", &m, &[]);
    let field = TensorFile::read(tmp.path().join("flow/flow.rstf")).unwrap().to_field().unwrap();
    assert!(field.mean_magnitude() < 1e-6);
    let rep = read_json(&tmp.path().join("flow/report.json"));
    assert_eq!(rep["spec_version"], "1.0");
    assert!(rep["levels"].is_array());

    let mut scene = pan_scene();
    scene["width"] = json!(16);
    scene["height"] = json!(16);
    let m = write_manifest(
        tmp.path(),
        "oracle.json",
        &json!({
            "input": {"scene": scene}, "transfer": "linear",
            "shutter": {"t_r_us": 200.0, "t_e_ms": 2.0}, "centers_s": [0.06],
            "samples_dense": 256, "write_tensors": true, "output_dir": "oracle"
        }),
    );
    run_ok("oracle", &m, &[]);
    assert!(tmp.path().join("oracle/oracle_0000.png").exists());
    assert!(tmp.path().join("oracle/oracle_0000.rstf").exists());
}
