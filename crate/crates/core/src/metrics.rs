//! Full-reference quality metrics and a row-striping indicator.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::imagecore::Frame;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB, `f64::INFINITY` for identical inputs.
pub fn psnr(a: &Frame, b: &Frame, peak: f64) -> Result<f64> {
    a.ensure_same_shape(b, "psnr")?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(format!("psnr peak must be positive, got {peak}")));
    }
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.data().len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.map(|t| t / s)
}

/// Mean SSIM together with the means of its two factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimBreakdown {
    pub ssim: f64,
    /// `(2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1)`.
    pub luminance: f64,
    /// `(2 cov + C2) / (var_a + var_b + C2)`.
    pub contrast_structure: f64,
}

/// Gaussian-windowed statistics over the valid region of one channel.
fn channel_breakdown(a: &Frame, b: &Frame, c: usize, taps: &[f64; SSIM_WINDOW]) -> (f64, f64, f64) {
    let (w, h) = (a.width(), a.height());
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let (c1, c2) = (K1 * K1, K2 * K2);
    // Horizontal pass of the five moments for every input row.
    let horiz: Vec<[Vec<f64>; 5]> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut m: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; ow]);
            for x in 0..ow {
                let mut s = [0.0f64; 5];
                for (k, t) in taps.iter().enumerate() {
                    let p = a.get(x + k, y, c) as f64;
                    let q = b.get(x + k, y, c) as f64;
                    s[0] += t * p;
                    s[1] += t * q;
                    s[2] += t * p * p;
                    s[3] += t * q * q;
                    s[4] += t * p * q;
                }
                for (mi, si) in m.iter_mut().zip(s) {
                    mi[x] = si;
                }
            }
            m
        })
        .collect();
    let rows: Vec<(f64, f64, f64)> = (0..oh)
        .into_par_iter()
        .map(|y| {
            let mut acc = (0.0, 0.0, 0.0);
            for x in 0..ow {
                let mut s = [0.0f64; 5];
                for (k, t) in taps.iter().enumerate() {
                    for (si, hi) in s.iter_mut().zip(&horiz[y + k]) {
                        *si += t * hi[x];
                    }
                }
                let (ma, mb) = (s[0], s[1]);
                let va = s[2] - ma * ma;
                let vb = s[3] - mb * mb;
                let cov = s[4] - ma * mb;
                let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                let cs = (2.0 * cov + c2) / (va + vb + c2);
                acc.0 += l * cs;
                acc.1 += l;
                acc.2 += cs;
            }
            acc
        })
        .collect();
    let n = (ow * oh) as f64;
    let (s, l, cs) = rows.iter().fold((0.0, 0.0, 0.0), |t, r| (t.0 + r.0, t.1 + r.1, t.2 + r.2));
    (s / n, l / n, cs / n)
}

/// Mean SSIM and its factors, averaged over channels.
pub fn ssim_breakdown(a: &Frame, b: &Frame) -> Result<SsimBreakdown> {
    a.ensure_same_shape(b, "ssim")?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let taps = gaussian_taps();
    let ch = a.channels();
    let (mut s, mut l, mut cs) = (0.0, 0.0, 0.0);
    for c in 0..ch {
        let r = channel_breakdown(a, b, c, &taps);
        s += r.0;
        l += r.1;
        cs += r.2;
    }
    let n = ch as f64;
    Ok(SsimBreakdown {
        ssim: s / n,
        luminance: l / n,
        contrast_structure: cs / n,
    })
}

/// Mean structural similarity: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, over the valid region, averaged over channels.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(ssim_breakdown(a, b)?.ssim)
}

/// Mean over adjacent row pairs of the mean absolute difference between them.
pub fn row_discontinuity(frame: &Frame) -> Result<f64> {
    let h = frame.height();
    if h < 2 {
        return Err(Error::InvalidArgument("row_discontinuity needs at least two rows".into()));
    }
    let n = frame.row_len() as f64;
    let total: f64 = (1..h)
        .map(|y| {
            let d: f64 = frame
                .row(y)
                .iter()
                .zip(frame.row(y - 1))
                .map(|(&p, &q)| (p as f64 - q as f64).abs())
                .sum();
            d / n
        })
        .sum();
    Ok(total / (h - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_discontinuity: Option<f64>,
}

impl MetricReport {
    pub fn compute(a: &Frame, b: &Frame, with_rows: bool) -> Result<Self> {
        Ok(Self {
            psnr_db: psnr(a, b, 1.0)?,
            ssim: ssim(a, b)?,
            row_discontinuity: if with_rows { Some(row_discontinuity(b)?) } else { None },
        })
    }
}

/// Writes infinite PSNR as the string `"inf"`.
pub fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}
