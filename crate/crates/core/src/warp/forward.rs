use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::warp::{DisplacementField, ValidityMask};

pub const DEFAULT_MIN_WEIGHT: f64 = 1e-4;

/// Source rows per partial accumulator. Fixed so that the reduction order,
/// and therefore every output bit, is independent of the thread count.
const BLOCK_ROWS: usize = 16;

/// Raw accumulation of a bilinear splat before normalization.
#[derive(Debug, Clone)]
pub struct Splat {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Weighted value sums, `width * height * channels`.
    pub values: Vec<f64>,
    /// Accumulated bilinear weight per target pixel.
    pub weights: Vec<f64>,
    /// Total weight that landed outside the image.
    pub lost_weight: f64,
}

struct Partial {
    row0: usize,
    rows: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
    lost: f64,
}

fn splat_block(src: &Frame, field: &DisplacementField, y_range: std::ops::Range<usize>) -> Partial {
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let target = |x: usize, y: usize| {
        let (u, v) = field.get(x, y);
        (x as f64 + u as f64, y as f64 + v as f64)
    };
    // Bounding box of target rows touched by this block.
    let (mut lo, mut hi) = (usize::MAX, 0usize);
    for y in y_range.clone() {
        for x in 0..w {
            let ty = target(x, y).1.floor();
            if ty >= -1.0 && ty <= h as f64 - 1.0 {
                let r0 = ty.max(0.0) as usize;
                let r1 = ((ty + 1.0) as usize).min(h - 1);
                lo = lo.min(r0);
                hi = hi.max(r1);
            }
        }
    }
    let rows = if lo == usize::MAX { 0 } else { hi - lo + 1 };
    let row0 = if rows == 0 { 0 } else { lo };
    let mut part = Partial {
        row0,
        rows,
        values: vec![0.0; rows * w * ch],
        weights: vec![0.0; rows * w],
        lost: 0.0,
    };
    for y in y_range {
        for x in 0..w {
            let (tx, ty) = target(x, y);
            let (x0, y0) = (tx.floor(), ty.floor());
            let (fx, fy) = (tx - x0, ty - y0);
            let taps = [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x0 + 1.0, y0, fx * (1.0 - fy)),
                (x0, y0 + 1.0, (1.0 - fx) * fy),
                (x0 + 1.0, y0 + 1.0, fx * fy),
            ];
            let s = &src.data()[(y * w + x) * ch..(y * w + x + 1) * ch];
            for (cx, cy, wt) in taps {
                if wt == 0.0 {
                    continue;
                }
                if cx < 0.0 || cy < 0.0 || cx >= w as f64 || cy >= h as f64 {
                    part.lost += wt;
                    continue;
                }
                let (cx, cy) = (cx as usize, cy as usize - row0);
                let t = cy * w + cx;
                part.weights[t] += wt;
                for c in 0..ch {
                    part.values[t * ch + c] += wt * s[c] as f64;
                }
            }
        }
    }
    part
}

/// Scatters each source pixel onto the four integer neighbors of
/// `p + field(p)` with bilinear weights.
///
/// Source rows are split into fixed blocks accumulated independently (in
/// parallel) and merged in block order, so the result is bit-identical for
/// any thread count.
pub fn splat(src: &Frame, field: &DisplacementField) -> Result<Splat> {
    field.ensure_matches(src, "forward_warp")?;
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let blocks: Vec<_> = (0..h).step_by(BLOCK_ROWS).map(|y| y..(y + BLOCK_ROWS).min(h)).collect();
    let partials: Vec<Partial> = blocks.into_par_iter().map(|r| splat_block(src, field, r)).collect();
    let mut values = vec![0.0; w * h * ch];
    let mut weights = vec![0.0; w * h];
    let mut lost_weight = 0.0;
    for p in partials {
        let off = p.row0 * w;
        for (dst, v) in weights[off..off + p.rows * w].iter_mut().zip(&p.weights) {
            *dst += v;
        }
        for (dst, v) in values[off * ch..(off + p.rows * w) * ch].iter_mut().zip(&p.values) {
            *dst += v;
        }
        lost_weight += p.lost;
    }
    Ok(Splat {
        width: w,
        height: h,
        channels: ch,
        values,
        weights,
        lost_weight,
    })
}

impl Splat {
    /// Divides accumulated values by accumulated weight where the weight is
    /// at least `min_weight`; other pixels become holes (value 0, mask 0).
    pub fn normalize(&self, min_weight: f64) -> Result<(Frame, ValidityMask)> {
        if !(min_weight > 0.0 && min_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "minimum splat weight must be positive, got {min_weight}"
            )));
        }
        let ch = self.channels;
        let mut out = vec![0.0f32; self.values.len()];
        let mut mask = vec![0.0f32; self.weights.len()];
        for (i, &wt) in self.weights.iter().enumerate() {
            if wt >= min_weight {
                for c in 0..ch {
                    out[i * ch + c] = (self.values[i * ch + c] / wt) as f32;
                }
                mask[i] = wt.min(1.0) as f32;
            }
        }
        Ok((
            Frame::from_raw(self.width, self.height, ch, out),
            ValidityMask::from_raw(self.width, self.height, mask),
        ))
    }
}

/// Forward (splat) warp, normalized by accumulated weight.
///
/// Pixels whose accumulated weight is below `min_weight` are holes: output
/// 0 and mask 0. Elsewhere the mask is the accumulated weight capped at 1.
/// Holes are only reported, never filled.
pub fn forward_warp(src: &Frame, field: &DisplacementField, min_weight: f64) -> Result<(Frame, ValidityMask)> {
    if !(min_weight > 0.0 && min_weight.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "minimum splat weight must be positive, got {min_weight}"
        )));
    }
    splat(src, field)?.normalize(min_weight)
}
