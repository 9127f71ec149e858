use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::warp::DisplacementField;

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Charbonnier constant must be positive, got {eps}")))
    }
}

/// `sqrt(r^2 + eps^2)` and its derivative.
#[inline]
pub(crate) fn rho(r: f64, eps: f64) -> (f64, f64) {
    let s = (r * r + eps * eps).sqrt();
    (s, r / s)
}

pub(crate) fn charbonnier_sum(residual: &[f64], eps: f64, grad: Option<&mut [f64]>) -> f64 {
    match grad {
        Some(g) => residual
            .iter()
            .zip(g.iter_mut())
            .map(|(&r, g)| {
                let (v, d) = rho(r, eps);
                *g = d;
                v
            })
            .sum(),
        None => residual.iter().map(|&r| rho(r, eps).0).sum(),
    }
}

/// Charbonnier penalty summed over all samples, with its elementwise gradient.
pub fn charbonnier_loss(residual: &Frame, eps: f64) -> Result<(f64, Frame)> {
    check_eps(eps)?;
    let r: Vec<f64> = residual.data().iter().map(|&v| v as f64).collect();
    let mut g = vec![0.0; r.len()];
    let loss = charbonnier_sum(&r, eps, Some(&mut g));
    let grad = Frame::new(
        residual.width(),
        residual.height(),
        residual.channels(),
        g.into_iter().map(|v| v as f32).collect(),
    )?;
    Ok((loss, grad))
}

/// Charbonnier-smoothed anisotropic total variation over interleaved
/// `(u, v)` data: the penalty of every horizontal and vertical forward
/// difference of each component. Accumulates the gradient into `grad` when given.
pub(crate) fn tv_sum(data: &[f32], width: usize, height: usize, eps: f64, mut grad: Option<&mut [f64]>) -> f64 {
    let at = |x: usize, y: usize, c: usize| data[2 * (y * width + x) + c] as f64;
    let mut loss = 0.0;
    for y in 0..height {
        for x in 0..width {
            for c in 0..2 {
                let here = at(x, y, c);
                let i = 2 * (y * width + x) + c;
                if x + 1 < width {
                    let (v, d) = rho(at(x + 1, y, c) - here, eps);
                    loss += v;
                    if let Some(g) = grad.as_deref_mut() {
                        g[i + 2] += d;
                        g[i] -= d;
                    }
                }
                if y + 1 < height {
                    let (v, d) = rho(at(x, y + 1, c) - here, eps);
                    loss += v;
                    if let Some(g) = grad.as_deref_mut() {
                        g[i + 2 * width] += d;
                        g[i] -= d;
                    }
                }
            }
        }
    }
    loss
}

/// Total-variation penalty of a displacement field with its analytic gradient.
pub fn tv_loss(field: &DisplacementField, eps: f64) -> Result<(f64, DisplacementField)> {
    check_eps(eps)?;
    let mut g = vec![0.0; field.data().len()];
    let loss = tv_sum(field.data(), field.width(), field.height(), eps, Some(&mut g));
    let grad = DisplacementField::new(field.width(), field.height(), g.into_iter().map(|v| v as f32).collect())?;
    Ok((loss, grad))
}
