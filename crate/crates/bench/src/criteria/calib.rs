use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rscd_core::calib::{dlt, estimate_homography, Correspondences, Homography};

use crate::oracles::rng;
use crate::{Check, Measurement, SuiteConfig};

fn random_homography(r: &mut ChaCha8Rng) -> anyhow::Result<Homography> {
    Ok(Homography::new([
        [1.0 + r.random_range(-0.1..0.1), r.random_range(-0.1..0.1), r.random_range(-10.0..10.0)],
        [r.random_range(-0.1..0.1), 1.0 + r.random_range(-0.1..0.1), r.random_range(-10.0..10.0)],
        [r.random_range(-5e-4..5e-4), r.random_range(-5e-4..5e-4), 1.0],
    ])?)
}

fn points(r: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [r.random_range(0.0..640.0), r.random_range(0.0..480.0)]).collect()
}

/// 30 correspondences over a 640x480 view with σ = 0.5 px noise on the
/// targets, and noise-free DLT.
pub fn homography(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let mut r = rng(cfg.seed ^ 0x6361_6c69);
    let noise = Normal::new(0.0, 0.5)?;
    let mut worst_rms = 0.0f64;
    let mut worst_entry = 0.0f64;
    for _ in 0..10 {
        let h = random_homography(&mut r)?;
        let pts = points(&mut r, 30);
        let mut noisy = Vec::with_capacity(pts.len());
        let mut exact = Vec::with_capacity(pts.len());
        for &p in &pts {
            let t = h.apply(p).ok_or_else(|| anyhow::anyhow!("point maps to infinity"))?;
            exact.push((p, t));
            noisy.push((p, [t[0] + noise.sample(&mut r), t[1] + noise.sample(&mut r)]));
        }
        let (_, rms) = estimate_homography(&Correspondences::new(noisy)?)?;
        worst_rms = worst_rms.max(rms);
        let est = dlt(&Correspondences::new(exact)?)?;
        for (a, b) in est.matrix().iter().flatten().zip(h.matrix().iter().flatten()) {
            worst_entry = worst_entry.max((a - b).abs());
        }
    }
    Ok(vec![
        Measurement::new("noisy_rms_px", worst_rms, Check::Lt(1.0)),
        Measurement::new("noise_free_max_entry_err", worst_entry, Check::Lt(1e-9)),
    ])
}
