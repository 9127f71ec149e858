use rscd_core::flowsolve::{solve_flow, SolverConfig};
use rscd_core::Frame;

use crate::oracles::texture;
use crate::{Check, Measurement, SuiteConfig};

const N: usize = 64;
const BORDER: usize = 8;

/// `b(q) = a(q + (3, 2))` on a smooth texture; the field mapping `a` onto
/// `b` is the constant `(3, 2)`.
pub fn accuracy(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let phase = (cfg.seed % 97) as f64 * 0.37;
    let shifted = |dx: f64, dy: f64| Frame::from_fn(N, N, 1, |x, y, _| texture(x as f64 + dx + phase, y as f64 + dy) as f32);
    let (a, b) = (shifted(0.0, 0.0)?, shifted(3.0, 2.0)?);
    let (d, report) = solve_flow(&a, &b, &SolverConfig::default())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in BORDER..N - BORDER {
        for x in BORDER..N - BORDER {
            let (u, v) = d.get(x, y);
            sum += ((u as f64 - 3.0).powi(2) + (v as f64 - 2.0).powi(2)).sqrt();
            n += 1;
        }
    }
    let increases: usize = report
        .levels
        .iter()
        .map(|l| l.objective_trace.windows(2).filter(|w| w[1] > w[0]).count())
        .sum();
    Ok(vec![
        Measurement::new("interior_epe_px", sum / n as f64, Check::Lt(0.3)),
        Measurement::new("objective_increases", increases as f64, Check::Le(0.0)),
    ])
}
