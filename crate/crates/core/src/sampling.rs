//! Bilinear sampling shared by the warps and the deformable convolution.
//!
//! Pixel `(x, y)` sits at integer coordinates; a sample at a fractional
//! position blends the four surrounding pixels. All arithmetic is `f64`.

use serde::{Deserialize, Serialize};

use crate::imagecore::Frame;

/// What a tap outside the image reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Outside pixels read as zero.
    #[default]
    Zero,
    /// Outside pixels read the nearest edge pixel.
    Clamp,
}

/// The four taps of one bilinear sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Footprint {
    /// Pixel index (`y * width + x`) of each tap, `None` when it reads zero.
    pub idx: [Option<usize>; 4],
    pub weight: [f64; 4],
    pub fx: f64,
    pub fy: f64,
    /// Every tap with nonzero weight lies inside the image.
    pub inside: bool,
}

pub(crate) fn footprint(width: usize, height: usize, x: f64, y: f64, boundary: Boundary) -> Footprint {
    // Far outside, every tap is out of bounds (zero) or on the edge (clamp);
    // bounding the coordinate keeps the integer conversion safe.
    let x = x.clamp(-2.0, width as f64 + 1.0);
    let y = y.clamp(-2.0, height as f64 + 1.0);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let weight = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    let coords = [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)];
    let (w, h) = (width as isize, height as isize);
    let mut idx = [None; 4];
    let mut inside = true;
    for (k, &(cx, cy)) in coords.iter().enumerate() {
        let in_bounds = (0..w).contains(&cx) && (0..h).contains(&cy);
        if !in_bounds && weight[k] > 0.0 {
            inside = false;
        }
        idx[k] = match boundary {
            Boundary::Zero if in_bounds => Some((cy * w + cx) as usize),
            Boundary::Zero => None,
            Boundary::Clamp => Some((cy.clamp(0, h - 1) * w + cx.clamp(0, w - 1)) as usize),
        };
    }
    Footprint {
        idx,
        weight,
        fx,
        fy,
        inside,
    }
}

#[inline]
fn tap_values(frame: &Frame, fp: &Footprint, c: usize) -> [f64; 4] {
    let ch = frame.channels();
    let data = frame.data();
    fp.idx.map(|i| i.map_or(0.0, |i| data[i * ch + c] as f64))
}

/// Samples every channel of `frame` at `(x, y)` into `out`.
pub fn sample_into(frame: &Frame, x: f64, y: f64, boundary: Boundary, out: &mut [f64]) {
    let fp = footprint(frame.width(), frame.height(), x, y, boundary);
    for (c, o) in out.iter_mut().enumerate().take(frame.channels()) {
        let v = tap_values(frame, &fp, c);
        *o = fp.weight[0] * v[0] + fp.weight[1] * v[1] + fp.weight[2] * v[2] + fp.weight[3] * v[3];
    }
}

/// Samples and differentiates with respect to the sample position.
///
/// The derivative is the one-sided slope of the cell containing the point;
/// on cell boundaries it is the slope of the cell to the right/below.
pub fn sample_with_grad(
    frame: &Frame,
    x: f64,
    y: f64,
    boundary: Boundary,
    value: &mut [f64],
    d_dx: &mut [f64],
    d_dy: &mut [f64],
) -> bool {
    let fp = footprint(frame.width(), frame.height(), x, y, boundary);
    // Beyond the bounding used in `footprint` the sample is constant.
    let x_free = (-2.0..=frame.width() as f64 + 1.0).contains(&x);
    let y_free = (-2.0..=frame.height() as f64 + 1.0).contains(&y);
    for c in 0..frame.channels() {
        let [v00, v10, v01, v11] = tap_values(frame, &fp, c);
        value[c] = fp.weight[0] * v00 + fp.weight[1] * v10 + fp.weight[2] * v01 + fp.weight[3] * v11;
        d_dx[c] = if x_free {
            (1.0 - fp.fy) * (v10 - v00) + fp.fy * (v11 - v01)
        } else {
            0.0
        };
        d_dy[c] = if y_free {
            (1.0 - fp.fx) * (v01 - v00) + fp.fx * (v11 - v10)
        } else {
            0.0
        };
    }
    fp.inside
}
