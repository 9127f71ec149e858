use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowsolve::loss::{rho, tv_sum};
use crate::imagecore::Frame;
use crate::sampling::{sample_with_grad, Boundary};
use crate::warp::{build_pyramid, upsample_field, DisplacementField};

/// Armijo sufficient-decrease constant for the backtracking line search.
const ARMIJO: f64 = 1e-4;

/// Weights and step control for [`solve_flow`].
///
/// The default weights (data 10, smoothness 0.1) follow the loss weighting
/// used to train the learned model this solver stands in for; they are a
/// convention, not a tuned optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda_c: f64,
    pub lambda_tv: f64,
    pub eps: f64,
    pub levels: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub rel_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_c: 10.0,
            lambda_tv: 0.1,
            eps: 1e-3,
            levels: 3,
            max_iters: 200,
            initial_step: 1.0,
            backtrack: 0.5,
            max_halvings: 20,
            rel_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("solver config: {what}")));
        if !(self.lambda_c >= 0.0 && self.lambda_c.is_finite()) || !(self.lambda_tv >= 0.0 && self.lambda_tv.is_finite()) {
            return bad("weights must be finite and nonnegative");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if self.levels == 0 {
            return bad("levels must be at least 1");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.rel_tol >= 0.0) {
            return bad("rel_tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub width: usize,
    pub height: usize,
    pub iters: usize,
    /// Objective at the level's initial field and after every accepted step.
    pub objective_trace: Vec<f64>,
    /// Infinity norm of the objective gradient at the final field.
    pub grad_inf_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Coarsest level first.
    pub levels: Vec<LevelReport>,
    pub final_objective: f64,
    pub iterations: usize,
    /// Whether the finest level stopped on the relative-decrease test rather
    /// than the iteration cap.
    pub converged: bool,
}

/// `E(D) = lambda_c * sum rho(I_a(q + D(q)) - I_b(q)) + lambda_tv * TV(D)` on
/// single-channel images, with `I_a` sampled under clamped borders.
struct Objective<'a> {
    a: &'a Frame,
    b: &'a Frame,
    cfg: &'a SolverConfig,
}

impl Objective<'_> {
    fn data_rows(&self, field: &DisplacementField, with_grad: bool) -> (f64, Vec<f64>) {
        let (w, h) = (self.a.width(), self.a.height());
        let eps = self.cfg.eps;
        let rows: Vec<(f64, Vec<f64>)> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut g = if with_grad { vec![0.0; 2 * w] } else { Vec::new() };
                let (mut val, mut dx, mut dy) = ([0.0], [0.0], [0.0]);
                let mut sum = 0.0;
                for x in 0..w {
                    let (u, v) = field.get(x, y);
                    sample_with_grad(
                        self.a,
                        x as f64 + u as f64,
                        y as f64 + v as f64,
                        Boundary::Clamp,
                        &mut val,
                        &mut dx,
                        &mut dy,
                    );
                    let (p, d) = rho(val[0] - self.b.get(x, y, 0) as f64, eps);
                    sum += p;
                    if with_grad {
                        g[2 * x] = d * dx[0];
                        g[2 * x + 1] = d * dy[0];
                    }
                }
                (sum, g)
            })
            .collect();
        let mut total = 0.0;
        let mut grad = Vec::with_capacity(if with_grad { 2 * w * h } else { 0 });
        for (s, g) in rows {
            total += s;
            grad.extend(g);
        }
        (total, grad)
    }

    fn value(&self, field: &DisplacementField) -> f64 {
        let (data, _) = self.data_rows(field, false);
        let tv = tv_sum(field.data(), field.width(), field.height(), self.cfg.eps, None);
        self.cfg.lambda_c * data + self.cfg.lambda_tv * tv
    }

    fn value_and_grad(&self, field: &DisplacementField) -> (f64, Vec<f64>) {
        let (data, mut grad) = self.data_rows(field, true);
        grad.iter_mut().for_each(|g| *g *= self.cfg.lambda_c);
        let mut tv_grad = vec![0.0; grad.len()];
        let tv = tv_sum(field.data(), field.width(), field.height(), self.cfg.eps, Some(&mut tv_grad));
        for (g, t) in grad.iter_mut().zip(tv_grad) {
            *g += self.cfg.lambda_tv * t;
        }
        (self.cfg.lambda_c * data + self.cfg.lambda_tv * tv, grad)
    }
}

fn luma_pair(a: &Frame, b: &Frame) -> Result<(Frame, Frame)> {
    a.ensure_same_shape(b, "solve_flow inputs")?;
    Ok((a.to_luma()?, b.to_luma()?))
}

/// Evaluates the flow objective and its gradient with respect to `field`.
/// Three-channel inputs are reduced to Rec. 601 luma first.
pub fn flow_objective(a: &Frame, b: &Frame, field: &DisplacementField, cfg: &SolverConfig) -> Result<(f64, DisplacementField)> {
    cfg.validate()?;
    let (a, b) = luma_pair(a, b)?;
    field.ensure_matches(&a, "flow_objective")?;
    let obj = Objective { a: &a, b: &b, cfg };
    let (e, g) = obj.value_and_grad(field);
    Ok((e, DisplacementField::new(field.width(), field.height(), g.into_iter().map(|v| v as f32).collect())?))
}

fn descend(obj: &Objective<'_>, mut field: DisplacementField, cfg: &SolverConfig) -> (DisplacementField, LevelReport) {
    let (w, h) = (field.width(), field.height());
    let (mut e, mut grad) = obj.value_and_grad(&field);
    let mut trace = vec![e];
    let mut step = cfg.initial_step;
    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.max_iters {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f32> = field
                .data()
                .iter()
                .zip(&grad)
                .map(|(&d, &g)| (d as f64 - alpha * g) as f32)
                .collect();
            if trial.iter().all(|v| v.is_finite()) {
                let trial = DisplacementField::from_raw(w, h, trial);
                let et = obj.value(&trial);
                if et <= e - ARMIJO * alpha * g2 && et < e {
                    accepted = Some((trial, et));
                    break;
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some((next, e_next)) = accepted else {
            // No step along the negative gradient decreases E: stationary up
            // to the line search resolution.
            converged = true;
            break;
        };
        iters += 1;
        let rel = (e - e_next) / e.abs().max(f64::MIN_POSITIVE);
        field = next;
        e = e_next;
        trace.push(e);
        grad = obj.value_and_grad(&field).1;
        step = alpha / cfg.backtrack;
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    let grad_inf_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    (
        field,
        LevelReport {
            width: w,
            height: h,
            iters,
            objective_trace: trace,
            grad_inf_norm,
            converged,
        },
    )
}

/// Coarse-to-fine variational displacement estimation.
///
/// Returns `D` on `b`'s grid such that `a(q + D(q)) ≈ b(q)`: for a scene
/// moving by `d` from `b` to `a`, `D ≈ d`. Starting from zero on the coarsest
/// level, each level runs gradient descent with a backtracking (Armijo) line
/// search, and its result is upsampled to seed the next finer level.
pub fn solve_flow(a: &Frame, b: &Frame, cfg: &SolverConfig) -> Result<(DisplacementField, SolveReport)> {
    solve_flow_from(a, b, cfg, None)
}

/// [`solve_flow`] with an optional initial field at the finest resolution,
/// which replaces the coarse-to-fine schedule with a single-level solve.
pub fn solve_flow_from(
    a: &Frame,
    b: &Frame,
    cfg: &SolverConfig,
    init: Option<&DisplacementField>,
) -> Result<(DisplacementField, SolveReport)> {
    cfg.validate()?;
    let (a, b) = luma_pair(a, b)?;
    if let Some(init) = init {
        init.ensure_matches(&a, "initial field")?;
        let obj = Objective { a: &a, b: &b, cfg };
        let (field, level) = descend(&obj, init.clone(), cfg);
        return Ok((field, report(vec![level])));
    }
    let pa = build_pyramid(&a, cfg.levels)?;
    let pb = build_pyramid(&b, cfg.levels)?;
    let mut field: Option<DisplacementField> = None;
    let mut levels = Vec::with_capacity(cfg.levels);
    for s in (0..cfg.levels).rev() {
        let (la, lb) = (pa.level(s), pb.level(s));
        let start = match field {
            None => DisplacementField::zeros(la.width(), la.height())?,
            Some(f) => upsample_field(&f, la.width(), la.height())?,
        };
        let obj = Objective { a: la, b: lb, cfg };
        let (f, level) = descend(&obj, start, cfg);
        field = Some(f);
        levels.push(level);
    }
    Ok((field.expect("at least one level"), report(levels)))
}

fn report(levels: Vec<LevelReport>) -> SolveReport {
    let last = levels.last().expect("at least one level");
    SolveReport {
        final_objective: *last.objective_trace.last().unwrap(),
        iterations: levels.iter().map(|l| l.iters).sum(),
        converged: last.converged,
        levels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(x: f64, y: f64) -> f32 {
        (0.5 + 0.2 * (0.31 * x + 0.1 * y).sin() + 0.15 * (0.23 * y - 0.07 * x).cos() + 0.1 * (0.17 * (x + y)).sin())
            as f32
    }

    #[test]
    fn identical_frames_stay_at_zero() {
        let a = Frame::from_fn(32, 32, 1, |x, y, _| texture(x as f64, y as f64)).unwrap();
        let (d, rep) = solve_flow(&a, &a, &SolverConfig::default()).unwrap();
        assert!(d.mean_magnitude() < 0.05);
        assert!(rep.converged);
    }

    #[test]
    fn traces_never_increase() {
        let a = Frame::from_fn(32, 32, 1, |x, y, _| texture(x as f64, y as f64)).unwrap();
        let b = Frame::from_fn(32, 32, 1, |x, y, _| texture(x as f64 + 1.5, y as f64 - 0.5)).unwrap();
        let (_, rep) = solve_flow(&a, &b, &SolverConfig::default()).unwrap();
        for l in &rep.levels {
            assert!(l.objective_trace.windows(2).all(|p| p[1] < p[0]));
        }
    }

    #[test]
    fn config_validation() {
        let a = Frame::zeros(8, 8, 1).unwrap();
        let mut cfg = SolverConfig {
            eps: 0.0,
            ..Default::default()
        };
        assert!(solve_flow(&a, &a, &cfg).is_err());
        cfg.eps = 1e-3;
        cfg.levels = 5;
        assert!(solve_flow(&a, &a, &cfg).is_err(), "8 px cannot hold 5 levels");
        assert!(solve_flow(&a, &Frame::zeros(8, 7, 1).unwrap(), &SolverConfig::default()).is_err());
        let parsed: std::result::Result<SolverConfig, _> = serde_json::from_str(r#"{"lambda_c": 1, "bogus": 2}"#);
        assert!(parsed.is_err());
        let parsed: SolverConfig = serde_json::from_str(r#"{"levels": 2}"#).unwrap();
        assert_eq!(parsed.lambda_c, 10.0);
    }
}
