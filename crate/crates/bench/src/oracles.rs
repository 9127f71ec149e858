//! Reference computations written independently of the optimized kernels:
//! plain loops, central differences and closed-form textures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rscd_core::nnkernels::{ConvWeights, OffsetGrid};
use rscd_core::warp::DisplacementField;
use rscd_core::Frame;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform value in `[lo, hi)` rounded to a multiple of `2^-bits`, so that
/// small dyadic perturbations are exact in `f32`.
pub fn dyadic(r: &mut ChaCha8Rng, lo: f64, hi: f64, bits: i32) -> f32 {
    let q = 2f64.powi(bits);
    ((r.random_range(lo..hi) * q).round() / q) as f32
}

pub fn random_frame(r: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Frame {
    let data = (0..w * h * c).map(|_| dyadic(r, 0.0, 1.0, 8)).collect();
    Frame::new(w, h, c, data).expect("valid frame")
}

pub fn signed_frame(r: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Frame {
    Frame::new(w, h, c, (0..w * h * c).map(|_| r.random_range(-1.0f32..1.0)).collect()).expect("valid frame")
}

/// Displacements whose fractional parts stay in `[0.1, 0.9]`, away from
/// the kinks of bilinear interpolation.
pub fn random_field(r: &mut ChaCha8Rng, w: usize, h: usize, max_int: i32) -> DisplacementField {
    let data = (0..w * h * 2)
        .map(|_| r.random_range(-max_int..=max_int) as f32 + dyadic(r, 0.1, 0.9, 12))
        .collect();
    DisplacementField::new(w, h, data).expect("valid field")
}

pub fn random_weights(r: &mut ChaCha8Rng, cout: usize, cin: usize, k: usize, stride: usize, pad: usize) -> ConvWeights {
    let taps = (0..cout * cin * k * k).map(|_| r.random_range(-1.0f32..1.0)).collect();
    ConvWeights::new(cout, cin, k, stride, pad, taps).expect("valid weights")
}

/// Smooth band-limited texture, defined at any real position.
pub fn texture(x: f64, y: f64) -> f64 {
    0.5 + 0.18 * (0.21 * x + 0.13 * y + 0.4).sin()
        + 0.12 * (0.11 * x - 0.27 * y + 1.3).cos()
        + 0.08 * (0.33 * x + 0.05 * y + 2.1).sin() * (0.09 * y).cos()
}

/// `max |a - n| / max |n|`
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let num = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let den = numeric.iter().fold(0.0f64, |m, n| m.max(n.abs()));
    num / den.max(f64::MIN_POSITIVE)
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((*x as f64 - *y as f64).abs()))
}

pub fn max_abs_diff64(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((*x as f64 - y).abs()))
}

pub fn crop(f: &Frame, b: usize) -> Frame {
    Frame::from_fn(f.width() - 2 * b, f.height() - 2 * b, f.channels(), |x, y, c| f.get(x + b, y + b, c))
        .expect("crop inside frame")
}

/// Central difference of `f` along each coordinate of `x`.
pub fn central_diff(x: &[f32], h: f32, mut f: impl FnMut(&[f32]) -> f64) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|i| {
            v[i] = x[i] + h;
            let p = f(&v);
            v[i] = x[i] - h;
            let m = f(&v);
            v[i] = x[i];
            (p - m) / (2.0 * h as f64)
        })
        .collect()
}

/// Bilinear read with zero fill, tap by tap.
pub fn naive_bilinear(f: &Frame, x: f64, y: f64, c: usize) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (ax, ay) = (x - x0, y - y0);
    let px = |i: f64, j: f64| -> f64 {
        if i < 0.0 || j < 0.0 || i >= f.width() as f64 || j >= f.height() as f64 {
            0.0
        } else {
            f.get(i as usize, j as usize, c) as f64
        }
    };
    px(x0, y0) * (1.0 - ax) * (1.0 - ay)
        + px(x0 + 1.0, y0) * ax * (1.0 - ay)
        + px(x0, y0 + 1.0) * (1.0 - ax) * ay
        + px(x0 + 1.0, y0 + 1.0) * ax * ay
}

/// Seven nested loops over output position, channels and taps.
pub fn naive_conv(f: &Frame, w: &ConvWeights, offsets: Option<&OffsetGrid>) -> Vec<f64> {
    let ow = w.output_len(f.width()).expect("output width");
    let oh = w.output_len(f.height()).expect("output height");
    let k = w.kernel();
    let mut out = vec![0.0; ow * oh * w.out_channels()];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..w.out_channels() {
                let mut acc = 0.0;
                for i in 0..w.in_channels() {
                    for ky in 0..k {
                        for kx in 0..k {
                            let mut x = (ox * w.stride() + kx) as f64 - w.padding() as f64;
                            let mut y = (oy * w.stride() + ky) as f64 - w.padding() as f64;
                            if let Some(g) = offsets {
                                let group = i / (w.in_channels() / g.groups());
                                let (dx, dy) = g.get(ox, oy, group, ky * k + kx);
                                x += dx as f64;
                                y += dy as f64;
                            }
                            acc += w.tap(o, i, ky, kx) as f64 * naive_bilinear(f, x, y, i);
                        }
                    }
                }
                out[(oy * ow + ox) * w.out_channels() + o] = acc;
            }
        }
    }
    out
}

/// Squeeze-and-excitation written out with explicit sums.
pub fn naive_se(f: &Frame, w1: &[f32], b1: &[f32], w2: &[f32], b2: &[f32]) -> Vec<f64> {
    let c = f.channels();
    let h = b1.len();
    let n = (f.width() * f.height()) as f64;
    let mut pooled = vec![0.0f64; c];
    for y in 0..f.height() {
        for x in 0..f.width() {
            for (ch, p) in pooled.iter_mut().enumerate() {
                *p += f.get(x, y, ch) as f64 / n;
            }
        }
    }
    let hidden: Vec<f64> = (0..h)
        .map(|j| {
            let z = b1[j] as f64 + (0..c).map(|i| w1[j * c + i] as f64 * pooled[i]).sum::<f64>();
            z.max(0.0)
        })
        .collect();
    let gates: Vec<f64> = (0..c)
        .map(|i| {
            let z = b2[i] as f64 + (0..h).map(|j| w2[i * h + j] as f64 * hidden[j]).sum::<f64>();
            1.0 / (1.0 + (-z).exp())
        })
        .collect();
    f.data().iter().enumerate().map(|(i, &v)| v as f64 * gates[i % c]).collect()
}
