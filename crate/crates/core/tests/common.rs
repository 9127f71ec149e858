#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rscd_core::warp::DisplacementField;
use rscd_core::Frame;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform value in `[lo, hi)` rounded to a multiple of `2^-bits`.
pub fn dyadic(rng: &mut ChaCha8Rng, lo: f64, hi: f64, bits: i32) -> f32 {
    let q = 2f64.powi(bits);
    ((rng.random_range(lo..hi) * q).round() / q) as f32
}

pub fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Frame {
    let data = (0..w * h * c).map(|_| dyadic(rng, 0.0, 1.0, 8)).collect();
    Frame::new(w, h, c, data).unwrap()
}

/// Random displacements whose sample positions keep at least 0.1 px from
/// every bilinear cell boundary.
pub fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize, max_int: i32) -> DisplacementField {
    let comp = |rng: &mut ChaCha8Rng| {
        let k = rng.random_range(-max_int..=max_int) as f32;
        k + dyadic(rng, 0.1, 0.9, 12)
    };
    let data = (0..w * h * 2).map(|_| comp(rng)).collect();
    DisplacementField::new(w, h, data).unwrap()
}

/// Smooth band-limited texture, evaluable at any real position.
pub fn texture(x: f64, y: f64) -> f64 {
    0.5 + 0.18 * (0.21 * x + 0.13 * y + 0.4).sin()
        + 0.12 * (0.11 * x - 0.27 * y + 1.3).cos()
        + 0.08 * (0.33 * x + 0.05 * y + 2.1).sin() * (0.09 * y).cos()
}

/// `max |a - n| / max |n|`.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let num = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let den = numeric.iter().fold(0.0f64, |m, n| m.max(n.abs()));
    num / den.max(f64::MIN_POSITIVE)
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}
