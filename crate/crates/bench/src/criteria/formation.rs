use rscd_core::formation::{oracle_rscd, simulate_gs_blur, simulate_rs, simulate_rscd, SynthesisMode};
use rscd_core::metrics::row_discontinuity;
use rscd_core::scene::{SceneKind, SyntheticScene};
use rscd_core::ShutterParams;

use crate::oracles::max_abs_diff;
use crate::{Check, Measurement, SuiteConfig};

const KINDS: [(SceneKind, &str); 5] = [
    (SceneKind::Pan, "pan"),
    (SceneKind::RotonlyText, "rotonly_text"),
    (SceneKind::Ramp, "ramp"),
    (SceneKind::Checker, "checker"),
    (SceneKind::Noise, "noise"),
];

/// Exposure `0` collapses the combined model onto rolling shutter, readout
/// `0` onto global-shutter blur.
pub fn reduction_chain(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let mut out = vec![];
    let modes = [SynthesisMode::default(), SynthesisMode::rowcopy()];
    for (k, (kind, name)) in KINDS.iter().enumerate() {
        let mut s = SyntheticScene::new(*kind, 32, 24, 100.0, 8);
        s.channels = 3;
        s.velocity = [150.0, -60.0];
        s.angular_velocity = 2.0;
        s.seed = cfg.seed + k as u64;
        let seq = s.sequence()?;
        let (mut rs_gap, mut blur_gap) = (0.0f64, 0.0f64);
        for mode in &modes {
            let no_exposure = ShutterParams::new(3e-4, 0.0)?;
            let a = simulate_rscd(&seq, 0.035, &no_exposure, mode)?;
            let b = simulate_rs(&seq, 0.035, &no_exposure, mode)?;
            rs_gap = rs_gap.max(max_abs_diff(a.data(), b.data()));
            let no_readout = ShutterParams::new(0.0, 0.012)?;
            let a = simulate_rscd(&seq, 0.035, &no_readout, mode)?;
            let b = simulate_gs_blur(&seq, 0.035, &no_readout, mode)?;
            blur_gap = blur_gap.max(max_abs_diff(a.data(), b.data()));
        }
        out.push(Measurement::new(format!("{name}_te0_vs_rs"), rs_gap, Check::Le(0.0)));
        out.push(Measurement::new(format!("{name}_tr0_vs_blur"), blur_gap, Check::Lt(1e-6)));
    }
    Ok(out)
}

/// Fast synthesis against dense brute-force sampling on scenes whose signal
/// is linear in time, where piecewise-linear reconstruction is exact.
pub fn oracle_equivalence(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let shutter = ShutterParams::new(2e-4, 0.012)?;
    let mode = SynthesisMode::interpolate(64)?;
    let mut out = vec![];
    for (i, (v, channels)) in [([90.0, 40.0], 1), ([-70.0, 55.0], 3)].into_iter().enumerate() {
        let mut s = SyntheticScene::new(SceneKind::Ramp, 64, 64, 100.0, 8);
        s.velocity = v;
        s.channels = channels;
        s.seed = cfg.seed + i as u64;
        let seq = s.sequence()?;
        let fast = simulate_rscd(&seq, 0.035, &shutter, &mode)?;
        let dense = oracle_rscd(&seq, 0.035, &shutter, 1024)?;
        out.push(Measurement::new(
            format!("ramp{i}_max_abs_diff"),
            max_abs_diff(fast.data(), dense.data()),
            Check::Lt(1e-4),
        ));
    }
    Ok(out)
}

/// Frame-to-frame brightness flicker read out one frame interval per row:
/// nearest-frame synthesis alternates gain row by row, interpolation sits
/// halfway between frames and averages it out.
pub fn striping(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let (rows, fps) = (24usize, 100.0);
    let dt = 1.0 / fps;
    let mut s = SyntheticScene::new(SceneKind::Pan, 32, rows, fps, rows + 1);
    s.flicker = 0.2;
    s.seed = cfg.seed;
    let seq = s.sequence()?;
    let shutter = ShutterParams::new(dt, 0.0)?;
    // Row i lands at (i + 1/2) dt.
    let t = shutter.t_m(rows) + 0.5 * dt;
    let copy = row_discontinuity(&simulate_rs(&seq, t, &shutter, &SynthesisMode::rowcopy())?)?;
    let interp = row_discontinuity(&simulate_rs(&seq, t, &shutter, &SynthesisMode::default())?)?;
    Ok(vec![
        Measurement::new("rowcopy_row_discontinuity", copy, Check::Gt(0.0)),
        Measurement::new("interpolate_row_discontinuity", interp, Check::Ge(0.0)),
        Measurement::new("ratio", copy / interp, Check::Ge(2.0)),
    ])
}
