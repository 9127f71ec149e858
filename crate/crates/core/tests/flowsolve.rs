mod common;

use common::texture;
use rscd_core::flowsolve::{flow_objective, solve_flow, SolverConfig};
use rscd_core::warp::{build_pyramid, upsample_field, DisplacementField};
use rscd_core::Frame;

const N: usize = 64;
const BORDER: usize = 8;

fn shifted(dx: f64, dy: f64) -> Frame {
    Frame::from_fn(N, N, 1, |x, y, _| texture(x as f64 + dx, y as f64 + dy) as f32).unwrap()
}

fn interior_epe(d: &DisplacementField, u: f64, v: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for y in BORDER..N - BORDER {
        for x in BORDER..N - BORDER {
            let (a, b) = d.get(x, y);
            sum += ((a as f64 - u).powi(2) + (b as f64 - v).powi(2)).sqrt();
            n += 1;
        }
    }
    sum / n as f64
}

#[test]
fn recovers_integer_shift() {
    // b(q) = a(q + (3, 2)), so the field mapping a onto b is (3, 2).
    let (a, b) = (shifted(0.0, 0.0), shifted(3.0, 2.0));
    let (d, rep) = solve_flow(&a, &b, &SolverConfig::default()).unwrap();
    let epe = interior_epe(&d, 3.0, 2.0);
    assert!(epe < 0.3, "interior EPE {epe}");
    for level in &rep.levels {
        assert!(level.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }
    assert_eq!(rep.levels.len(), 3);
    assert_eq!(rep.final_objective, *rep.levels[2].objective_trace.last().unwrap());
}

#[test]
fn swapped_arguments_negate_the_field() {
    let (a, b) = (shifted(0.0, 0.0), shifted(3.0, 2.0));
    let cfg = SolverConfig::default();
    let (ab, _) = solve_flow(&a, &b, &cfg).unwrap();
    let (ba, _) = solve_flow(&b, &a, &cfg).unwrap();
    let mut sum = 0.0;
    let mut n = 0;
    for y in BORDER..N - BORDER {
        for x in BORDER..N - BORDER {
            let (p, q) = (ab.get(x, y), ba.get(x, y));
            sum += (((p.0 + q.0) as f64).powi(2) + ((p.1 + q.1) as f64).powi(2)).sqrt();
            n += 1;
        }
    }
    let m = sum / n as f64;
    assert!(m < 0.5, "mean |D_ab + D_ba| = {m}");
}

#[test]
fn identical_frames_give_zero_field() {
    let a = Frame::from_fn(N, N, 3, |x, y, c| (texture(x as f64, y as f64) * (0.8 + 0.1 * c as f64)) as f32).unwrap();
    let (d, rep) = solve_flow(&a, &a, &SolverConfig::default()).unwrap();
    assert!(d.mean_magnitude() < 0.05);
    assert!(rep.converged);
}

#[test]
fn coarse_solution_seeds_finer_level() {
    let cfg = SolverConfig::default();
    for &(dx, dy) in &[(3.0, 2.0), (-2.5, 1.0), (1.5, -3.0)] {
        let (a, b) = (shifted(0.0, 0.0), shifted(dx, dy));
        let (pa, pb) = (build_pyramid(&a, 2).unwrap(), build_pyramid(&b, 2).unwrap());
        let single = SolverConfig { levels: 1, ..cfg.clone() };
        let (coarse, _) = solve_flow(pa.level(1), pb.level(1), &single).unwrap();
        let seeded = upsample_field(&coarse, N, N).unwrap();
        let (e_seeded, _) = flow_objective(&a, &b, &seeded, &cfg).unwrap();
        let (e_zero, _) = flow_objective(&a, &b, &DisplacementField::zeros(N, N).unwrap(), &cfg).unwrap();
        assert!(e_seeded < e_zero, "shift ({dx}, {dy}): {e_seeded} vs {e_zero}");
    }
}

#[test]
fn reports_stationarity() {
    let (a, b) = (shifted(0.0, 0.0), shifted(1.0, 0.5));
    let (_, rep) = solve_flow(&a, &b, &SolverConfig::default()).unwrap();
    let finest = rep.levels.last().unwrap();
    assert!(finest.grad_inf_norm.is_finite());
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json["levels"][0]["iters"].is_u64());
    assert!(json["levels"][0]["objective_trace"].is_array());
    assert!(json["converged"].is_boolean());
}
