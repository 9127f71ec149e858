//! Rolling-shutter rectification: every row is moved to where its content
//! would have been at the frame's mid-row time `t`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{Frame, ShutterParams};
use crate::sampling::Boundary;
use crate::warp::{backward_warp, forward_warp, DisplacementField, ValidityMask, DEFAULT_MIN_WEIGHT};

/// Constant image-plane velocity in pixels per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMotion {
    v: [f64; 2],
}

impl GlobalMotion {
    pub fn new(vx: f64, vy: f64) -> Result<Self> {
        if !vx.is_finite() || !vy.is_finite() {
            return Err(Error::InvalidArgument(format!("velocity ({vx}, {vy}) is not finite")));
        }
        Ok(Self { v: [vx, vy] })
    }

    pub fn vx(&self) -> f64 {
        self.v[0]
    }

    pub fn vy(&self) -> f64 {
        self.v[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectifyResult {
    pub frame: Frame,
    pub mask: ValidityMask,
    /// Time shift applied to row `i`, `t_m - i * t_r` seconds.
    pub row_offsets: Vec<f64>,
}

fn row_offsets(rows: usize, shutter: &ShutterParams) -> Vec<f64> {
    (0..rows).map(|i| shutter.row_offset(i, rows)).collect()
}

fn splat_rows(rs: &Frame, field: DisplacementField, offsets: Vec<f64>) -> Result<RectifyResult> {
    let (frame, mask) = forward_warp(rs, &field, DEFAULT_MIN_WEIGHT)?;
    Ok(RectifyResult {
        frame,
        mask,
        row_offsets: offsets,
    })
}

/// Undoes the row timing of a frame captured under constant velocity `motion`:
/// row `i` is splatted by `v * (t_m - i * t_r)`.
pub fn rectify_global(rs: &Frame, motion: &GlobalMotion, shutter: &ShutterParams) -> Result<RectifyResult> {
    let offsets = row_offsets(rs.height(), shutter);
    let field = DisplacementField::from_fn(rs.width(), rs.height(), |_, y| {
        ((motion.vx() * offsets[y]) as f32, (motion.vy() * offsets[y]) as f32)
    })?;
    splat_rows(rs, field, offsets)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("frame interval must be positive, got {dt}")))
    }
}

/// Rectifies with a dense flow to the next frame, taken as constant velocity
/// over the interval `dt`: pixel `p` on row `i` moves by
/// `flow_next(p) * (t_m - i * t_r) / dt`.
pub fn rectify_with_flow(
    rs: &Frame,
    flow_next: &DisplacementField,
    dt: f64,
    shutter: &ShutterParams,
) -> Result<RectifyResult> {
    check_dt(dt)?;
    flow_next.ensure_matches(rs, "rectify_with_flow")?;
    let offsets = row_offsets(rs.height(), shutter);
    let field = DisplacementField::from_fn(rs.width(), rs.height(), |x, y| {
        let (u, v) = flow_next.get(x, y);
        let s = offsets[y] / dt;
        ((u as f64 * s) as f32, (v as f64 * s) as f32)
    })?;
    splat_rows(rs, field, offsets)
}

/// Which neighbor of the current frame a flow points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Previous,
    Next,
}

/// Resamples a neighboring rolling-shutter frame onto the current frame's
/// mid-row time.
///
/// `flow` maps the current frame onto the neighbor (`current(q) ≈
/// neighbor(q + flow(q))`). Row `y` of the next frame was read
/// `dt - t_m + y * t_r` after `t`, so it is gathered with
/// `flow * (1 + (y * t_r - t_m) / dt)`; the previous frame mirrors this.
pub fn align_neighbor(
    neighbor: &Frame,
    flow: &DisplacementField,
    dt: f64,
    shutter: &ShutterParams,
    side: Neighbor,
) -> Result<(Frame, ValidityMask)> {
    check_dt(dt)?;
    flow.ensure_matches(neighbor, "align_neighbor")?;
    let rows = neighbor.height();
    let field = DisplacementField::from_fn(neighbor.width(), rows, |x, y| {
        let (u, v) = flow.get(x, y);
        let lag = -shutter.row_offset(y, rows) / dt;
        let s = match side {
            Neighbor::Next => 1.0 + lag,
            Neighbor::Previous => 1.0 - lag,
        };
        ((u as f64 * s) as f32, (v as f64 * s) as f32)
    })?;
    backward_warp(neighbor, &field, Boundary::Zero)
}

/// Mask-weighted average of the rectified frame and two aligned neighbors.
/// Pixels no source covers take the value of the nearest covered pixel
/// (4-connected breadth-first search, seeded in row-major order).
pub fn fuse_aligned(
    primary: &RectifyResult,
    warped_prev: (&Frame, &ValidityMask),
    warped_next: (&Frame, &ValidityMask),
) -> Result<Frame> {
    let sources = [
        (&primary.frame, &primary.mask),
        (warped_prev.0, warped_prev.1),
        (warped_next.0, warped_next.1),
    ];
    let (w, h, ch) = (primary.frame.width(), primary.frame.height(), primary.frame.channels());
    for (f, m) in sources {
        f.ensure_same_shape(&primary.frame, "fuse_aligned")?;
        if m.width() != w || m.height() != h {
            return Err(Error::DimensionMismatch(format!(
                "fuse_aligned: mask is {}x{}, frame is {w}x{h}",
                m.width(),
                m.height()
            )));
        }
    }
    let mut out = vec![0.0f32; w * h * ch];
    let mut filled = vec![false; w * h];
    let mut acc = vec![0.0f64; ch];
    for p in 0..w * h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut total = 0.0f64;
        for (f, m) in sources {
            let wt = m.data()[p] as f64;
            if wt > 0.0 {
                total += wt;
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += wt * f.data()[p * ch + c] as f64;
                }
            }
        }
        if total > 0.0 {
            filled[p] = true;
            for c in 0..ch {
                out[p * ch + c] = (acc[c] / total) as f32;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&p| filled[p]).collect();
    if queue.is_empty() {
        return Err(Error::Degenerate("fuse_aligned: no source covers any pixel".into()));
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        let neighbors = [
            (y > 0).then(|| p - w),
            (x > 0).then(|| p - 1),
            (x + 1 < w).then(|| p + 1),
            (y + 1 < h).then(|| p + w),
        ];
        for q in neighbors.into_iter().flatten() {
            if !filled[q] {
                filled[q] = true;
                out.copy_within(p * ch..(p + 1) * ch, q * ch);
                queue.push_back(q);
            }
        }
    }
    Frame::new(w, h, ch, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, 3, |x, y, c| {
            (0.5 + 0.3 * (0.3 * x as f64 + 0.2 * c as f64).sin() * (0.25 * y as f64).cos()) as f32
        })
        .unwrap()
    }

    #[test]
    fn no_motion_is_identity() {
        let f = texture(12, 10);
        let sh = ShutterParams::new(1e-3, 0.0).unwrap();
        let r = rectify_global(&f, &GlobalMotion::new(0.0, 0.0).unwrap(), &sh).unwrap();
        assert_eq!(r.frame, f);
        assert!(r.mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn zero_readout_is_identity() {
        let f = texture(12, 10);
        let sh = ShutterParams::new(0.0, 0.0).unwrap();
        let r = rectify_global(&f, &GlobalMotion::new(300.0, -120.0).unwrap(), &sh).unwrap();
        assert_eq!(r.frame, f);
        assert!(r.row_offsets.iter().all(|&o| o == 0.0));
        let flow = DisplacementField::constant(12, 10, 4.0, 1.0).unwrap();
        let r = rectify_with_flow(&f, &flow, 0.05, &sh).unwrap();
        assert_eq!(r.frame, f);
    }

    #[test]
    fn row_offsets_are_exact() {
        let f = texture(4, 10);
        let sh = ShutterParams::new(0.25, 0.0).unwrap();
        let r = rectify_global(&f, &GlobalMotion::new(1.0, 0.0).unwrap(), &sh).unwrap();
        for (i, &o) in r.row_offsets.iter().enumerate() {
            assert_eq!(o, 1.25 - i as f64 * 0.25);
        }
        assert_eq!(r.row_offsets[5], 0.0);
        // The middle row moves by zero and lands exactly on itself.
        assert_eq!(r.frame.row(5), f.row(5));
    }

    #[test]
    fn zero_flow_is_identity() {
        let f = texture(9, 8);
        let sh = ShutterParams::new(1e-3, 2e-3).unwrap();
        let r = rectify_with_flow(&f, &DisplacementField::zeros(9, 8).unwrap(), 0.05, &sh).unwrap();
        assert_eq!(r.frame, f);
        assert!(rectify_with_flow(&f, &DisplacementField::zeros(9, 8).unwrap(), 0.0, &sh).is_err());
        assert!(rectify_with_flow(&f, &DisplacementField::zeros(8, 8).unwrap(), 0.05, &sh).is_err());
    }

    fn result(frame: Frame, mask: ValidityMask) -> RectifyResult {
        let rows = frame.height();
        RectifyResult {
            frame,
            mask,
            row_offsets: vec![0.0; rows],
        }
    }

    #[test]
    fn fusion_examples() {
        let (w, h) = (5, 4);
        let a = Frame::filled(w, h, 1, 0.2).unwrap();
        let b = Frame::filled(w, h, 1, 0.5).unwrap();
        let c = Frame::filled(w, h, 1, 0.8).unwrap();
        let (ones, zeros) = (ValidityMask::ones(w, h), ValidityMask::zeros(w, h));

        let out = fuse_aligned(&result(a.clone(), ones.clone()), (&b, &zeros), (&c, &zeros)).unwrap();
        assert_eq!(out, a);

        let out = fuse_aligned(&result(a.clone(), ones.clone()), (&b, &ones), (&c, &ones)).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-7));

        let mut m = vec![1.0f32; w * h];
        m[7] = 0.0;
        let hole = ValidityMask::new(w, h, m).unwrap();
        let mut only = vec![0.0f32; w * h];
        only[7] = 1.0;
        let only = ValidityMask::new(w, h, only).unwrap();
        let out = fuse_aligned(&result(a.clone(), hole), (&b, &zeros), (&c, &only)).unwrap();
        assert_eq!(out.data()[7], 0.8);
        assert_eq!(out.data()[6], 0.2);
    }

    #[test]
    fn holes_take_nearest_valid_value() {
        let (w, h) = (6, 1);
        let f = Frame::new(w, h, 1, vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.9]).unwrap();
        let m = ValidityMask::new(w, h, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let z = ValidityMask::zeros(w, h);
        let out = fuse_aligned(&result(f.clone(), m), (&f, &z), (&f, &z)).unwrap();
        assert_eq!(out.data(), &[0.1, 0.1, 0.1, 0.9, 0.9, 0.9]);
        let err = fuse_aligned(&result(f.clone(), z.clone()), (&f, &z), (&f, &z));
        assert!(err.is_err());
    }
}
