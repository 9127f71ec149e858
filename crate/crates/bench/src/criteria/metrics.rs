use rscd_core::metrics::{psnr, ssim};
use rscd_core::Frame;

use crate::oracles::{random_frame, rng};
use crate::{Check, Measurement, SuiteConfig};

pub fn identities(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let mut r = rng(cfg.seed ^ 0x6d65_7472);
    let a = Frame::from_fn(48, 40, 3, |x, y, c| ((x * 7 + y * 3 + c * 11) % 90) as f32 / 100.0)?;
    let b = a.map(|v| v + 0.1)?;
    let offset = psnr(&a, &b, 1.0)?;
    let self_ssim = ssim(&a, &a)?;
    let mut asym = 0.0f64;
    for _ in 0..10 {
        let x = random_frame(&mut r, 24, 20, 3);
        let y = random_frame(&mut r, 24, 20, 3);
        asym = asym
            .max((psnr(&x, &y, 1.0)? - psnr(&y, &x, 1.0)?).abs())
            .max((ssim(&x, &y)? - ssim(&y, &x)?).abs());
    }
    Ok(vec![
        Measurement::new("offset_0.1_psnr_db", offset, Check::Within { target: 20.0, tol: 1e-3 }),
        Measurement::new("ssim_self", self_ssim, Check::Within { target: 1.0, tol: 1e-12 }),
        Measurement::new("max_asymmetry", asym, Check::Le(1e-9)),
    ])
}
