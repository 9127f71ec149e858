mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rscd_core::calib::{apply_homography, dlt, estimate_color_matrix, estimate_homography, Correspondences, Homography};
use rscd_core::sampling::Boundary;
use rscd_core::Frame;

fn random_homography(r: &mut ChaCha8Rng) -> Homography {
    Homography::new([
        [1.0 + r.random_range(-0.1..0.1), r.random_range(-0.1..0.1), r.random_range(-10.0..10.0)],
        [r.random_range(-0.1..0.1), 1.0 + r.random_range(-0.1..0.1), r.random_range(-10.0..10.0)],
        [r.random_range(-5e-4..5e-4), r.random_range(-5e-4..5e-4), 1.0],
    ])
    .unwrap()
}

fn random_points(r: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [r.random_range(0.0..640.0), r.random_range(0.0..480.0)]).collect()
}

fn grid() -> Vec<[f64; 2]> {
    (0..8).flat_map(|i| (0..6).map(move |j| [40.0 + 80.0 * i as f64, 40.0 + 80.0 * j as f64])).collect()
}

fn grid_rms(a: &Homography, b: &Homography) -> f64 {
    let g = grid();
    let s: f64 = g
        .iter()
        .map(|&p| {
            let (x, y) = (a.apply(p).unwrap(), b.apply(p).unwrap());
            (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
        })
        .sum();
    (s / g.len() as f64).sqrt()
}

#[test]
fn noise_free_dlt_is_exact() {
    let mut r = rng(41);
    for _ in 0..10 {
        let h = random_homography(&mut r);
        let n = 4 + r.random_range(0..20);
        let pts = random_points(&mut r, n);
        let c = Correspondences::new(pts.iter().map(|&p| (p, h.apply(p).unwrap())).collect()).unwrap();
        let est = dlt(&c).unwrap();
        assert!(grid_rms(&est, &h) < 1e-9);
        for i in 0..3 {
            for j in 0..3 {
                assert!((est.matrix()[i][j] - h.matrix()[i][j]).abs() < 1e-9 * h.matrix()[i][j].abs().max(1.0));
            }
        }
    }
}

#[test]
fn noisy_correspondences_reach_subpixel() {
    let mut r = rng(42);
    let noise = Normal::new(0.0, 0.5).unwrap();
    for trial in 0..20 {
        let h = random_homography(&mut r);
        let pts = random_points(&mut r, 30);
        let pairs = pts
            .iter()
            .map(|&p| {
                let t = h.apply(p).unwrap();
                (p, [t[0] + noise.sample(&mut r), t[1] + noise.sample(&mut r)])
            })
            .collect();
        let (est, rms) = estimate_homography(&Correspondences::new(pairs).unwrap()).unwrap();
        assert!(rms < 1.0, "trial {trial}: rms {rms}");
        assert!(grid_rms(&est, &h) < 1.0, "trial {trial}: grid {}", grid_rms(&est, &h));
    }
}

#[test]
fn round_trip_resampling() {
    let f = Frame::from_fn(64, 48, 1, |x, y, _| {
        (0.5 + 0.2 * (0.15 * x as f64).sin() + 0.2 * (0.11 * y as f64 + 0.3).cos()) as f32
    })
    .unwrap();
    let h = Homography::new([[1.02, 0.03, 1.3], [-0.02, 0.99, -0.7], [1e-4, -5e-5, 1.0]]).unwrap();
    let there = apply_homography(&f, &h, Boundary::Zero).unwrap();
    let back = apply_homography(&there, &h.inverse().unwrap(), Boundary::Zero).unwrap();
    let mut worst = 0.0f32;
    for y in 8..40 {
        for x in 8..56 {
            worst = worst.max((back.get(x, y, 0) - f.get(x, y, 0)).abs());
        }
    }
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn color_matrix_monte_carlo() {
    let mut r = rng(43);
    let noise = Normal::new(0.0, 0.005).unwrap();
    for _ in 0..10 {
        let m: [[f64; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 } + r.random_range(-0.3..0.3)));
        let measured: Vec<[f64; 3]> = (0..24).map(|_| std::array::from_fn(|_| r.random_range(0.05..0.95))).collect();
        let reference: Vec<[f64; 3]> = measured
            .iter()
            .map(|p| std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + noise.sample(&mut r)))
            .collect();
        let (est, _) = estimate_color_matrix(&measured, &reference).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((est.matrix()[i][j] - m[i][j]).abs() < 0.02);
            }
        }
    }
}

#[test]
fn color_residual_grows_with_nested_noisy_sets() {
    // Noise-free data fits exactly at every size; the residual sum can
    // only grow as patches are added to a nested set.
    let mut r = rng(44);
    let m = [[1.1, 0.1, -0.05], [0.02, 0.9, 0.1], [-0.1, 0.05, 1.2]];
    let measured: Vec<[f64; 3]> = (0..24).map(|_| std::array::from_fn(|_| r.random_range(0.05..0.95))).collect();
    let reference: Vec<[f64; 3]> = measured
        .iter()
        .map(|p| std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2]))
        .collect();
    for n in 3..=24 {
        let (_, rms) = estimate_color_matrix(&measured[..n], &reference[..n]).unwrap();
        assert!(rms < 1e-12, "n = {n}: {rms}");
    }
    let noisy: Vec<[f64; 3]> = reference.iter().map(|p| p.map(|v| v + r.random_range(-0.01..0.01))).collect();
    let mut last = 0.0;
    for n in 4..=24 {
        let (_, rms) = estimate_color_matrix(&measured[..n], &noisy[..n]).unwrap();
        let sse = rms * rms * n as f64;
        assert!(sse >= last - 1e-15, "n = {n}");
        last = sse;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dlt_invariant_to_similarity_of_sources(
        seed in 0u64..1000, angle in -3.1f64..3.1, scale in 0.2f64..5.0, tx in -300.0f64..300.0, ty in -300.0f64..300.0,
    ) {
        let mut r = rng(seed);
        let h = random_homography(&mut r);
        let pts = random_points(&mut r, 12);
        let pairs: Vec<_> = pts.iter().map(|&p| {
            let t = h.apply(p).unwrap();
            (p, [t[0] + r.random_range(-0.5..0.5), t[1] + r.random_range(-0.5..0.5)])
        }).collect();
        let (c, s) = (scale * angle.cos(), scale * angle.sin());
        let sim = Homography::new([[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]]).unwrap();
        let moved: Vec<_> = pairs.iter().map(|&(p, t)| (sim.apply(p).unwrap(), t)).collect();
        let h0 = dlt(&Correspondences::new(pairs).unwrap()).unwrap();
        let h1 = dlt(&Correspondences::new(moved).unwrap()).unwrap();
        for p in grid() {
            let a = h0.apply(p).unwrap();
            let b = h1.apply(sim.apply(p).unwrap()).unwrap();
            prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9, "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn refined_estimate_invariant_to_rigid_motion(seed in 0u64..1000, angle in -3.1f64..3.1, tx in -300.0f64..300.0) {
        let mut r = rng(seed);
        let h = random_homography(&mut r);
        let pts = random_points(&mut r, 12);
        let pairs: Vec<_> = pts.iter().map(|&p| {
            let t = h.apply(p).unwrap();
            (p, [t[0] + r.random_range(-0.5..0.5), t[1] + r.random_range(-0.5..0.5)])
        }).collect();
        let rigid = Homography::new([[angle.cos(), -angle.sin(), tx], [angle.sin(), angle.cos(), -tx], [0.0, 0.0, 1.0]]).unwrap();
        let moved: Vec<_> = pairs.iter().map(|&(p, t)| (rigid.apply(p).unwrap(), t)).collect();
        let (h0, e0) = estimate_homography(&Correspondences::new(pairs).unwrap()).unwrap();
        let (h1, e1) = estimate_homography(&Correspondences::new(moved).unwrap()).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-6);
        for p in grid() {
            let a = h0.apply(p).unwrap();
            let b = h1.apply(rigid.apply(p).unwrap()).unwrap();
            prop_assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        }
    }
}
