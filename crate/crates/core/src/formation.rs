//! Rolling-shutter, motion-blur and combined image formation over a
//! discretely sampled global-shutter sequence.
//!
//! Row `i` of an `M`-row rolling-shutter frame centered at `t` is exposed
//! around `t - t_m + i * t_r` with `t_m = (M / 2) * t_r`; blur averages the
//! signal over an exposure window of length `t_e` around that time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{Frame, FrameSequence, ShutterParams};

/// Slack, in frame intervals, tolerated at the ends of the sequence so that
/// row times computed in floating point still land inside it.
const RANGE_SLACK: f64 = 1e-9;

pub const DEFAULT_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthesisKind {
    /// Piecewise-linear interpolation between neighboring frames.
    Interpolate,
    /// Nearest frame, ties going to the earlier one.
    Rowcopy,
}

/// How the continuous global-shutter signal is reconstructed from frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisMode {
    pub kind: SynthesisKind,
    /// Samples used to average an exposure window in interpolate mode.
    /// Rowcopy integrates its piecewise-constant signal exactly and ignores it.
    pub samples_per_window: usize,
}

impl SynthesisMode {
    pub fn interpolate(samples_per_window: usize) -> Result<Self> {
        if samples_per_window < 2 {
            return Err(Error::InvalidArgument(format!(
                "samples per window must be at least 2, got {samples_per_window}"
            )));
        }
        Ok(Self {
            kind: SynthesisKind::Interpolate,
            samples_per_window,
        })
    }

    pub fn rowcopy() -> Self {
        Self {
            kind: SynthesisKind::Rowcopy,
            samples_per_window: DEFAULT_SAMPLES,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == SynthesisKind::Interpolate && self.samples_per_window < 2 {
            return Err(Error::InvalidArgument("samples per window must be at least 2".into()));
        }
        Ok(())
    }
}

impl Default for SynthesisMode {
    fn default() -> Self {
        Self {
            kind: SynthesisKind::Interpolate,
            samples_per_window: DEFAULT_SAMPLES,
        }
    }
}

/// Parameters of one synthesized frame, as written to metadata files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRecord {
    pub t: f64,
    pub t_r: f64,
    pub t_e: f64,
    pub mode: SynthesisKind,
    #[serde(rename = "S")]
    pub samples: usize,
}

impl SynthesisRecord {
    pub fn new(t: f64, shutter: &ShutterParams, mode: &SynthesisMode) -> Self {
        Self {
            t,
            t_r: shutter.t_r(),
            t_e: shutter.t_e(),
            mode: mode.kind,
            samples: mode.samples_per_window,
        }
    }
}

/// Continuous frame position of time `tau`, or an error naming `row`.
fn position(seq: &FrameSequence, tau: f64, row: Option<usize>) -> Result<f64> {
    let pos = (tau - seq.t0()) / seq.dt();
    let last = (seq.len() - 1) as f64;
    if !pos.is_finite() || pos < -RANGE_SLACK || pos > last + RANGE_SLACK {
        return Err(Error::TimeOutOfRange {
            row,
            time: tau,
            start: seq.t0(),
            end: seq.t_end(),
        });
    }
    Ok(pos.clamp(0.0, last))
}

/// Adds `weight * I_g(pos)[row]` into `acc`.
fn accumulate_row(seq: &FrameSequence, pos: f64, kind: SynthesisKind, row: usize, weight: f64, acc: &mut [f64]) {
    let last = seq.len() - 1;
    match kind {
        SynthesisKind::Interpolate => {
            let k = (pos.floor() as usize).min(last);
            let frac = pos - k as f64;
            let a = seq.frames()[k].row(row);
            if frac == 0.0 {
                for (o, &v) in acc.iter_mut().zip(a) {
                    *o += weight * v as f64;
                }
            } else {
                let b = seq.frames()[k + 1].row(row);
                for ((o, &va), &vb) in acc.iter_mut().zip(a).zip(b) {
                    let (va, vb) = (va as f64, vb as f64);
                    *o += weight * (va + frac * (vb - va));
                }
            }
        }
        SynthesisKind::Rowcopy => {
            let k = nearest_frame(pos, last);
            for (o, &v) in acc.iter_mut().zip(seq.frames()[k].row(row)) {
                *o += weight * v as f64;
            }
        }
    }
}

fn nearest_frame(pos: f64, last: usize) -> usize {
    // ceil(pos - 1/2) rounds halves down, i.e. toward the earlier frame.
    ((pos - 0.5).ceil().max(0.0) as usize).min(last)
}

/// Mean of row `row` of the signal over `[center - t_e/2, center + t_e/2]`.
fn integrate_row(
    seq: &FrameSequence,
    center: f64,
    t_e: f64,
    mode: &SynthesisMode,
    row: usize,
    acc: &mut [f64],
) -> Result<()> {
    acc.fill(0.0);
    if t_e == 0.0 {
        let pos = position(seq, center, Some(row))?;
        accumulate_row(seq, pos, mode.kind, row, 1.0, acc);
        return Ok(());
    }
    let lo = position(seq, center - t_e / 2.0, Some(row))?;
    let hi = position(seq, center + t_e / 2.0, Some(row))?;
    match mode.kind {
        SynthesisKind::Interpolate => {
            let s = mode.samples_per_window;
            let w = 1.0 / s as f64;
            for j in 0..s {
                let pos = lo + (hi - lo) * j as f64 / (s - 1) as f64;
                accumulate_row(seq, pos, mode.kind, row, 1.0, acc);
            }
            acc.iter_mut().for_each(|v| *v *= w);
        }
        SynthesisKind::Rowcopy => {
            // Frame k holds the signal on [k - 1/2, k + 1/2]; weight each
            // frame by its overlap with the window.
            let last = seq.len() - 1;
            let span = hi - lo;
            if span <= 0.0 {
                accumulate_row(seq, lo, mode.kind, row, 1.0, acc);
                return Ok(());
            }
            for k in nearest_frame(lo, last)..=nearest_frame(hi, last) {
                let a = lo.max(k as f64 - 0.5);
                let b = hi.min(k as f64 + 0.5);
                if b > a {
                    accumulate_row(seq, k as f64, mode.kind, row, (b - a) / span, acc);
                }
            }
        }
    }
    Ok(())
}

fn check_rows(seq: &FrameSequence, t: f64, shutter: &ShutterParams) -> Result<()> {
    let m = seq.height();
    for i in 0..m {
        let center = shutter.row_time(t, i, m);
        position(seq, center - shutter.t_e() / 2.0, Some(i))?;
        position(seq, center + shutter.t_e() / 2.0, Some(i))?;
    }
    Ok(())
}

/// Shared kernel: every row averaged over its own exposure window.
fn render(seq: &FrameSequence, t: f64, t_r: f64, t_e: f64, mode: &SynthesisMode) -> Result<Frame> {
    mode.validate()?;
    let shutter = ShutterParams::new(t_r, t_e)?;
    check_rows(seq, t, &shutter)?;
    let m = seq.height();
    let row_len = seq.frames()[0].row_len();
    let rows = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0f64; row_len];
            integrate_row(seq, shutter.row_time(t, i, m), t_e, mode, i, &mut acc)?;
            Ok(acc.into_iter().map(|v| v as f32).collect::<Vec<f32>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Frame::from_raw(seq.width(), m, seq.channels(), rows.concat()))
}

/// Instantaneous global-shutter image at time `tau`.
pub fn sample_gs(seq: &FrameSequence, tau: f64, mode: &SynthesisMode) -> Result<Frame> {
    mode.validate()?;
    let pos = position(seq, tau, None)?;
    if mode.kind == SynthesisKind::Rowcopy || pos.fract() == 0.0 {
        let k = match mode.kind {
            SynthesisKind::Rowcopy => nearest_frame(pos, seq.len() - 1),
            SynthesisKind::Interpolate => pos as usize,
        };
        return Ok(seq.frames()[k].clone());
    }
    render(seq, tau, 0.0, 0.0, mode)
}

/// Rolling-shutter frame without blur: row `i` is the global-shutter row at
/// `t - t_m + i * t_r`. The exposure time is ignored.
pub fn simulate_rs(seq: &FrameSequence, t: f64, shutter: &ShutterParams, mode: &SynthesisMode) -> Result<Frame> {
    render(seq, t, shutter.t_r(), 0.0, mode)
}

/// Global-shutter blur: the signal averaged over `[t - t_e/2, t + t_e/2]`.
pub fn simulate_gs_blur(seq: &FrameSequence, t: f64, shutter: &ShutterParams, mode: &SynthesisMode) -> Result<Frame> {
    render(seq, t, 0.0, shutter.t_e(), mode)
}

/// Rolling shutter with blur: each row averaged over its own exposure window.
pub fn simulate_rscd(seq: &FrameSequence, t: f64, shutter: &ShutterParams, mode: &SynthesisMode) -> Result<Frame> {
    render(seq, t, shutter.t_r(), shutter.t_e(), mode)
}

pub const MIN_ORACLE_SAMPLES: usize = 256;

/// Brute-force reference for [`simulate_rscd`] in interpolate mode.
///
/// Evaluates every pixel independently with its own frame lookup and a
/// `samples_dense`-point midpoint rule, costing `O(W * H * C * samples_dense)`.
/// Meant for verification only.
pub fn oracle_rscd(seq: &FrameSequence, t: f64, shutter: &ShutterParams, samples_dense: usize) -> Result<Frame> {
    if samples_dense < MIN_ORACLE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples_dense}"
        )));
    }
    let (w, h, ch) = (seq.width(), seq.height(), seq.channels());
    let n = seq.len();
    let t_r = shutter.t_r();
    let t_e = shutter.t_e();
    let t_m = h as f64 / 2.0 * t_r;
    let (start, end) = (seq.t0(), seq.t0() + (n - 1) as f64 * seq.dt());
    let tol = RANGE_SLACK * seq.dt();
    for i in 0..h {
        let c = t - t_m + i as f64 * t_r;
        for edge in [c - t_e / 2.0, c + t_e / 2.0] {
            if !(edge >= start - tol && edge <= end + tol) {
                return Err(Error::TimeOutOfRange {
                    row: Some(i),
                    time: edge,
                    start,
                    end,
                });
            }
        }
    }
    let value_at = |tau: f64, idx: usize| -> f64 {
        let p = ((tau - seq.t0()) / seq.dt()).clamp(0.0, (n - 1) as f64);
        let k = (p as usize).min(n - 2);
        let f = p - k as f64;
        (1.0 - f) * seq.frames()[k].data()[idx] as f64 + f * seq.frames()[k + 1].data()[idx] as f64
    };
    let mut out = vec![0.0f32; w * h * ch];
    for y in 0..h {
        let c = t - t_m + y as f64 * t_r;
        for x in 0..w {
            for k in 0..ch {
                let idx = (y * w + x) * ch + k;
                let v = if t_e == 0.0 {
                    value_at(c, idx)
                } else {
                    let mut sum = 0.0;
                    for j in 0..samples_dense {
                        let tau = c - t_e / 2.0 + t_e * (j as f64 + 0.5) / samples_dense as f64;
                        sum += value_at(tau, idx);
                    }
                    sum / samples_dense as f64
                };
                out[idx] = v as f32;
            }
        }
    }
    Ok(Frame::from_raw(w, h, ch, out))
}
