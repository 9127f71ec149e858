use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::sampling::{sample_into, Boundary};
use crate::warp::DisplacementField;

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Multi-scale stack: level 0 is the input, each further level is half the
/// size (rounded up) of the previous one.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Frame>,
}

impl Pyramid {
    pub fn levels(&self) -> &[Frame] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `s` counted from 0 (finest).
    pub fn level(&self, s: usize) -> &Frame {
        &self.levels[s]
    }

    pub fn coarsest(&self) -> &Frame {
        self.levels.last().expect("pyramid has at least one level")
    }
}

/// Mirror index without repeating the edge sample (`-1 -> 1`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// 5-tap binomial blur followed by keeping every other pixel.
pub fn downsample(frame: &Frame) -> Frame {
    let (w, h, ch) = (frame.width(), frame.height(), frame.channels());
    let (w2, h2) = (w.div_ceil(2), h.div_ceil(2));
    // Horizontal pass at the kept columns only.
    let mut tmp = vec![0.0f64; w2 * h * ch];
    for y in 0..h {
        for xo in 0..w2 {
            for (k, wt) in BINOMIAL.iter().enumerate() {
                let xs = reflect(2 * xo as isize + k as isize - 2, w);
                for c in 0..ch {
                    tmp[(y * w2 + xo) * ch + c] += wt * frame.get(xs, y, c) as f64;
                }
            }
        }
    }
    let mut out = vec![0.0f32; w2 * h2 * ch];
    for yo in 0..h2 {
        for xo in 0..w2 {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wt) in BINOMIAL.iter().enumerate() {
                    let ys = reflect(2 * yo as isize + k as isize - 2, h);
                    acc += wt * tmp[(ys * w2 + xo) * ch + c];
                }
                out[(yo * w2 + xo) * ch + c] = acc as f32;
            }
        }
    }
    Frame::from_raw(w2, h2, ch, out)
}

/// Builds a `levels`-deep pyramid; the frame must be at least
/// `2^(levels - 1)` pixels in each dimension.
pub fn build_pyramid(frame: &Frame, levels: usize) -> Result<Pyramid> {
    if levels == 0 {
        return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
    }
    let min = 1usize << (levels - 1).min(usize::BITS as usize - 1);
    if frame.width() < min || frame.height() < min {
        return Err(Error::InvalidArgument(format!(
            "{}x{} frame is too small for {levels} pyramid levels (needs {min} px per side)",
            frame.width(),
            frame.height()
        )));
    }
    let mut out = vec![frame.clone()];
    for _ in 1..levels {
        let next = downsample(out.last().unwrap());
        out.push(next);
    }
    Ok(Pyramid { levels: out })
}

/// Per-axis scale between pyramid levels: exactly 2 when the target is what
/// halving-with-round-up would have come from, else the plain size ratio.
fn axis_scale(src: usize, dst: usize) -> f64 {
    if dst == 2 * src || dst + 1 == 2 * src {
        2.0
    } else {
        dst as f64 / src as f64
    }
}

/// Bilinear upsampling of a coarse field to a finer grid; vectors are
/// multiplied by the spatial scale so they stay in target pixels.
pub fn upsample_field(field: &DisplacementField, target_w: usize, target_h: usize) -> Result<DisplacementField> {
    let (w, h) = (field.width(), field.height());
    if target_w < w || target_h < h {
        return Err(Error::InvalidArgument(format!(
            "upsample_field cannot shrink {w}x{h} to {target_w}x{target_h}"
        )));
    }
    let (sx, sy) = (axis_scale(w, target_w), axis_scale(h, target_h));
    let as_frame = Frame::from_raw(w, h, 2, field.data().to_vec());
    let mut data = Vec::with_capacity(target_w * target_h * 2);
    let mut uv = [0.0f64; 2];
    for y in 0..target_h {
        for x in 0..target_w {
            sample_into(&as_frame, x as f64 / sx, y as f64 / sy, Boundary::Clamp, &mut uv);
            data.push((uv[0] * sx) as f32);
            data.push((uv[1] * sy) as f32);
        }
    }
    DisplacementField::new(target_w, target_h, data)
}
