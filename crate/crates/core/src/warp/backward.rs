use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::sampling::{footprint, sample_into, sample_with_grad, Boundary};
use crate::warp::{DisplacementField, ValidityMask};

/// Gathers `src(q + field(q))` for every pixel, in `f64`, with the footprint mask.
pub(crate) fn gather(src: &Frame, field: &DisplacementField, oob: Boundary) -> (Vec<f64>, Vec<f32>) {
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let rows: Vec<(Vec<f64>, Vec<f32>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut vals = vec![0.0; w * ch];
            let mut mask = vec![1.0f32; w];
            for x in 0..w {
                let (u, v) = field.get(x, y);
                let (px, py) = (x as f64 + u as f64, y as f64 + v as f64);
                sample_into(src, px, py, oob, &mut vals[x * ch..(x + 1) * ch]);
                if oob == Boundary::Zero && !footprint(w, h, px, py, oob).inside {
                    mask[x] = 0.0;
                }
            }
            (vals, mask)
        })
        .collect();
    let mut values = Vec::with_capacity(w * h * ch);
    let mut mask = Vec::with_capacity(w * h);
    for (v, m) in rows {
        values.extend(v);
        mask.extend(m);
    }
    (values, mask)
}

/// Backward (gather) warp: `out(q)` is `src` bilinearly sampled at `q + field(q)`.
///
/// With [`Boundary::Zero`] the mask is 0 wherever a tap with nonzero weight
/// falls outside the image; with [`Boundary::Clamp`] every pixel is valid.
pub fn backward_warp(src: &Frame, field: &DisplacementField, oob: Boundary) -> Result<(Frame, ValidityMask)> {
    field.ensure_matches(src, "backward_warp")?;
    let (values, mask) = gather(src, field, oob);
    Ok((
        Frame::from_raw(
            src.width(),
            src.height(),
            src.channels(),
            values.into_iter().map(|v| v as f32).collect(),
        ),
        ValidityMask::from_raw(src.width(), src.height(), mask),
    ))
}

/// Gradient of `sum_q <upstream(q), warp(q)>` with respect to the field,
/// interleaved `(d/du, d/dv)` per pixel.
pub(crate) fn field_gradient(src: &Frame, field: &DisplacementField, upstream: &[f64], oob: Boundary) -> Vec<f64> {
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    debug_assert_eq!(upstream.len(), w * h * ch);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = vec![0.0; 2 * w];
            let mut val = vec![0.0; ch];
            let mut dx = vec![0.0; ch];
            let mut dy = vec![0.0; ch];
            for x in 0..w {
                let (u, v) = field.get(x, y);
                sample_with_grad(src, x as f64 + u as f64, y as f64 + v as f64, oob, &mut val, &mut dx, &mut dy);
                let g = &upstream[(y * w + x) * ch..(y * w + x + 1) * ch];
                out[2 * x] = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
                out[2 * x + 1] = g.iter().zip(&dy).map(|(a, b)| a * b).sum();
            }
            out
        })
        .collect();
    rows.concat()
}

/// Gradient with respect to the source image (the adjoint of the gather).
pub(crate) fn source_gradient(src: &Frame, field: &DisplacementField, upstream: &[f64], oob: Boundary) -> Vec<f64> {
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let mut out = vec![0.0; w * h * ch];
    // Sequential scatter keeps the summation order fixed.
    for y in 0..h {
        for x in 0..w {
            let (u, v) = field.get(x, y);
            let fp = footprint(w, h, x as f64 + u as f64, y as f64 + v as f64, oob);
            let g = &upstream[(y * w + x) * ch..(y * w + x + 1) * ch];
            for (idx, wt) in fp.idx.iter().zip(fp.weight) {
                if let Some(i) = idx {
                    for c in 0..ch {
                        out[i * ch + c] += wt * g[c];
                    }
                }
            }
        }
    }
    out
}

/// Analytic adjoints of [`backward_warp`] given the loss gradient at its output.
pub fn backward_warp_grad(
    src: &Frame,
    field: &DisplacementField,
    upstream: &Frame,
    oob: Boundary,
) -> Result<(Frame, DisplacementField)> {
    field.ensure_matches(src, "backward_warp_grad")?;
    src.ensure_same_shape(upstream, "backward_warp_grad upstream")?;
    let up: Vec<f64> = upstream.data().iter().map(|&v| v as f64).collect();
    let gs = source_gradient(src, field, &up, oob);
    let gf = field_gradient(src, field, &up, oob);
    let to_f32 = |v: Vec<f64>| -> Result<Vec<f32>> {
        let out: Vec<f32> = v.into_iter().map(|x| x as f32).collect();
        match out.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(out),
        }
    };
    Ok((
        Frame::new(src.width(), src.height(), src.channels(), to_f32(gs)?)?,
        DisplacementField::new(src.width(), src.height(), to_f32(gf)?)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, 1, |x, y, _| 0.5 + 0.3 * (0.7 * x as f32).sin() * (0.4 * y as f32).cos()).unwrap()
    }

    #[test]
    fn zero_field_is_identity() {
        let src = Frame::from_fn(7, 5, 3, |x, y, c| (x + 2 * y + c) as f32 / 30.0).unwrap();
        let (out, mask) = backward_warp(&src, &DisplacementField::zeros(7, 5).unwrap(), Boundary::Zero).unwrap();
        assert_eq!(out, src);
        assert!(mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn integer_shift_inverse() {
        let base = textured(12, 8);
        let shifted = Frame::from_fn(12, 8, 1, |x, y, _| if x == 0 { 0.0 } else { base.get(x - 1, y, 0) }).unwrap();
        let field = DisplacementField::constant(12, 8, 1.0, 0.0).unwrap();
        let (out, mask) = backward_warp(&shifted, &field, Boundary::Zero).unwrap();
        for y in 0..8 {
            for x in 0..11 {
                assert!((out.get(x, y, 0) - base.get(x, y, 0)).abs() < 1e-6);
                assert_eq!(mask.get(x, y), 1.0);
            }
            assert_eq!(mask.get(11, y), 0.0, "x = 12 lies past the last column");
        }
        let (_, mask) = backward_warp(&shifted, &DisplacementField::constant(12, 8, -1.0, 0.0).unwrap(), Boundary::Zero)
            .unwrap();
        assert_eq!(mask.get(0, 0), 0.0);
        let (_, mask) = backward_warp(&shifted, &DisplacementField::constant(12, 8, -1.0, 0.0).unwrap(), Boundary::Clamp)
            .unwrap();
        assert_eq!(mask.get(0, 0), 1.0);
    }

    #[test]
    fn half_pixel_on_ramp() {
        let ramp = Frame::from_fn(10, 3, 1, |x, _, _| 0.05 * x as f32).unwrap();
        let (out, _) = backward_warp(&ramp, &DisplacementField::constant(10, 3, 0.5, 0.0).unwrap(), Boundary::Zero)
            .unwrap();
        for x in 0..9 {
            assert!((out.get(x, 1, 0) - 0.05 * (x as f32 + 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_edge_cases() {
        let src = textured(6, 6);
        let up = Frame::filled(6, 6, 1, 1.0).unwrap();
        let (gs, _) = backward_warp_grad(&src, &DisplacementField::zeros(6, 6).unwrap(), &up, Boundary::Zero).unwrap();
        assert!(gs.data().iter().all(|&g| g == 1.0));

        let flat = Frame::filled(6, 6, 2, 0.4).unwrap();
        let up = Frame::filled(6, 6, 2, 0.7).unwrap();
        let field = DisplacementField::from_fn(6, 6, |x, y| (0.3 * x as f32 - 0.8, 0.2 * y as f32 - 0.5)).unwrap();
        let (_, gf) = backward_warp_grad(&flat, &field, &up, Boundary::Clamp).unwrap();
        assert!(gf.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let src = textured(6, 6);
        assert!(backward_warp(&src, &DisplacementField::zeros(5, 6).unwrap(), Boundary::Zero).is_err());
        let up = Frame::zeros(6, 5, 1).unwrap();
        assert!(backward_warp_grad(&src, &DisplacementField::zeros(6, 6).unwrap(), &up, Boundary::Zero).is_err());
    }
}
