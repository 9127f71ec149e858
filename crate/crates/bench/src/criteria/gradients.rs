use rand::Rng;
use rscd_core::flowsolve::{charbonnier_loss, flow_objective, tv_loss, SolverConfig};
use rscd_core::nnkernels::{bilinear_sample, bilinear_sample_grad};
use rscd_core::sampling::Boundary;
use rscd_core::warp::{backward_warp, backward_warp_grad, DisplacementField};
use rscd_core::Frame;

use crate::oracles::{central_diff, dyadic, random_field, random_frame, rel_err, rng, texture, to_f64};
use crate::{Check, Measurement, SuiteConfig};

const N: usize = 16;
/// Steps are powers of two so perturbed dyadic inputs stay exact.
const H_WARP: f32 = 1.0 / 1024.0;
const H_FINE: f32 = 1.0 / 1048576.0;
const TOL: f64 = 1e-4;

fn dot(a: &Frame, b: &Frame) -> f64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn fidelity(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let mut r = rng(cfg.seed ^ 0x6772_6164);
    let trials = cfg.gradient_trials;
    let (mut field_e, mut src_e, mut charb_e, mut tv_e, mut point_e, mut obj_e) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    let solver = SolverConfig::default();
    for trial in 0..trials {
        let channels = if trial % 2 == 0 { 1 } else { 3 };
        let oob = if trial < trials / 2 { Boundary::Zero } else { Boundary::Clamp };
        let src = random_frame(&mut r, N, N, channels);
        let field = random_field(&mut r, N, N, 2);
        let up = random_frame(&mut r, N, N, channels);
        let (g_src, g_field) = backward_warp_grad(&src, &field, &up, oob)?;
        let numeric = central_diff(field.data(), H_WARP, |d| {
            let f = DisplacementField::new(N, N, d.to_vec()).expect("same shape");
            dot(&backward_warp(&src, &f, oob).expect("warp").0, &up)
        });
        field_e = field_e.max(rel_err(&to_f64(g_field.data()), &numeric));
        let numeric = central_diff(src.data(), H_WARP, |d| {
            let s = Frame::new(N, N, channels, d.to_vec()).expect("same shape");
            dot(&backward_warp(&s, &field, oob).expect("warp").0, &up)
        });
        src_e = src_e.max(rel_err(&to_f64(g_src.data()), &numeric));

        let res = Frame::new(N, N, 1, (0..N * N).map(|_| dyadic(&mut r, -1.0, 1.0, 12)).collect())?;
        let (_, g) = charbonnier_loss(&res, 1e-3)?;
        let numeric = central_diff(res.data(), H_FINE, |d| {
            charbonnier_loss(&Frame::new(N, N, 1, d.to_vec()).expect("same shape"), 1e-3).expect("loss").0
        });
        charb_e = charb_e.max(rel_err(&to_f64(g.data()), &numeric));

        let tvf = DisplacementField::new(N, N, (0..N * N * 2).map(|_| dyadic(&mut r, -2.0, 2.0, 12)).collect())?;
        let (_, g) = tv_loss(&tvf, 1e-3)?;
        let numeric = central_diff(tvf.data(), H_FINE, |d| {
            tv_loss(&DisplacementField::new(N, N, d.to_vec()).expect("same shape"), 1e-3).expect("tv").0
        });
        tv_e = tv_e.max(rel_err(&to_f64(g.data()), &numeric));

        let tex = Frame::from_fn(N, N, 2, |x, y, c| texture(x as f64 + 3.0 * c as f64 + trial as f64, y as f64) as f32)?;
        let h = H_WARP as f64;
        let pts: Vec<[f64; 2]> = (0..32)
            .map(|_| {
                let mut p = || r.random_range(-1..N as i32) as f64 + dyadic(&mut r, 0.1, 0.9, 12) as f64;
                [p(), p()]
            })
            .collect();
        let (mut analytic, mut numeric) = (vec![], vec![]);
        for (p, s) in pts.iter().zip(bilinear_sample_grad(&tex, &pts)) {
            let v = bilinear_sample(&tex, &[[p[0] + h, p[1]], [p[0] - h, p[1]], [p[0], p[1] + h], [p[0], p[1] - h]]);
            for c in 0..2 {
                analytic.push(s.d_dx[c]);
                numeric.push((v[0][c] - v[1][c]) / (2.0 * h));
                analytic.push(s.d_dy[c]);
                numeric.push((v[2][c] - v[3][c]) / (2.0 * h));
            }
        }
        point_e = point_e.max(rel_err(&analytic, &numeric));

        let a = random_frame(&mut r, N, N, 1);
        let b = random_frame(&mut r, N, N, 1);
        let d = random_field(&mut r, N, N, 1);
        let (_, g) = flow_objective(&a, &b, &d, &solver)?;
        let numeric = central_diff(d.data(), H_FINE, |v| {
            let f = DisplacementField::new(N, N, v.to_vec()).expect("same shape");
            flow_objective(&a, &b, &f, &solver).expect("objective").0
        });
        obj_e = obj_e.max(rel_err(&to_f64(g.data()), &numeric));
    }
    Ok(vec![
        Measurement::new("backward_warp_field_rel_err", field_e, Check::Lt(TOL)),
        Measurement::new("backward_warp_source_rel_err", src_e, Check::Lt(TOL)),
        Measurement::new("charbonnier_rel_err", charb_e, Check::Lt(TOL)),
        Measurement::new("tv_rel_err", tv_e, Check::Lt(TOL)),
        Measurement::new("bilinear_point_rel_err", point_e, Check::Lt(TOL)),
        Measurement::new("flow_objective_rel_err", obj_e, Check::Lt(TOL)),
    ])
}
