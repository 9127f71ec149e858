use proptest::prelude::*;
use rscd_core::formation::{
    oracle_rscd, sample_gs, simulate_gs_blur, simulate_rs, simulate_rscd, SynthesisMode,
};
use rscd_core::scene::{SceneKind, SyntheticScene};
use rscd_core::{Frame, FrameSequence, ShutterParams};

const KINDS: [SceneKind; 5] = [
    SceneKind::Pan,
    SceneKind::RotonlyText,
    SceneKind::Ramp,
    SceneKind::Checker,
    SceneKind::Noise,
];

fn scene(kind: SceneKind, seed: u64) -> FrameSequence {
    let mut s = SyntheticScene::new(kind, 20, 12, 100.0, 6);
    s.channels = 3;
    s.velocity = [150.0, -60.0];
    s.angular_velocity = 2.0;
    s.seed = seed;
    s.sequence().unwrap()
}

fn max_abs(a: &Frame, b: &Frame) -> f32 {
    a.data().iter().zip(b.data()).fold(0.0f32, |m, (x, y)| m.max((x - y).abs()))
}

fn mode_strategy() -> impl Strategy<Value = SynthesisMode> {
    prop_oneof![
        (2usize..40).prop_map(|s| SynthesisMode::interpolate(s).unwrap()),
        Just(SynthesisMode::rowcopy()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_exposure_is_rolling_shutter(k in 0usize..5, seed in 0u64..4, t_r in 0.0f64..1e-3, mode in mode_strategy()) {
        let seq = scene(KINDS[k], seed);
        let sh = ShutterParams::new(t_r, 0.0).unwrap();
        let a = simulate_rscd(&seq, 0.025, &sh, &mode).unwrap();
        let b = simulate_rs(&seq, 0.025, &sh, &mode).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_readout_is_global_blur(k in 0usize..5, seed in 0u64..4, t_e in 0.0f64..0.02, mode in mode_strategy()) {
        let seq = scene(KINDS[k], seed);
        let a = simulate_rscd(&seq, 0.025, &ShutterParams::new(0.0, t_e).unwrap(), &mode).unwrap();
        let b = simulate_gs_blur(&seq, 0.025, &ShutterParams::new(0.0, t_e).unwrap(), &mode).unwrap();
        prop_assert!(max_abs(&a, &b) < 1e-6);
    }

    #[test]
    fn linear_in_the_sequence(
        alpha in -2.0f32..2.0, beta in -2.0f32..2.0,
        t_r in 0.0f64..1e-3, t_e in 0.0f64..0.01, mode in mode_strategy(),
    ) {
        let (a, b) = (scene(SceneKind::Pan, 1), scene(SceneKind::Noise, 2));
        let sh = ShutterParams::new(t_r, t_e).unwrap();
        let mix = a.combine(alpha, &b, beta).unwrap();
        let lhs = simulate_rscd(&mix, 0.025, &sh, &mode).unwrap();
        let ra = simulate_rscd(&a, 0.025, &sh, &mode).unwrap();
        let rb = simulate_rscd(&b, 0.025, &sh, &mode).unwrap();
        for ((l, x), y) in lhs.data().iter().zip(ra.data()).zip(rb.data()) {
            let r = alpha * x + beta * y;
            prop_assert!((l - r).abs() < 1e-5, "{} vs {}", l, r);
        }
    }

    #[test]
    fn static_scene_is_invariant(t in 0.01f64..0.04, t_r in 0.0f64..5e-4, t_e in 0.0f64..0.01, mode in mode_strategy()) {
        let f = Frame::from_fn(9, 8, 2, |x, y, c| ((x * 7 + y * 3 + c) % 10) as f32 / 10.0).unwrap();
        let seq = FrameSequence::new(vec![f.clone(); 6], 0.01, 0.0).unwrap();
        let out = simulate_rscd(&seq, t, &ShutterParams::new(t_r, t_e).unwrap(), &mode).unwrap();
        prop_assert_eq!(out, f);
    }
}

#[test]
fn knot_times_reproduce_frames() {
    let seq = scene(SceneKind::Checker, 0);
    for (k, f) in seq.frames().iter().enumerate() {
        for mode in [SynthesisMode::default(), SynthesisMode::rowcopy()] {
            assert_eq!(&sample_gs(&seq, seq.time_of(k), &mode).unwrap(), f);
        }
    }
}

#[test]
fn identical_under_any_thread_count() {
    let seq = scene(SceneKind::RotonlyText, 3);
    let sh = ShutterParams::new(7e-4, 6e-3).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_rscd(&seq, 0.025, &sh, &SynthesisMode::interpolate(24).unwrap()).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 4, 8] {
        assert_eq!(run(threads).data(), one.data());
    }
}

#[test]
fn matches_brute_force_oracle_on_linear_motion() {
    // An affine image under constant velocity is linear in time, so the
    // interpolated signal is exact and both quadratures agree.
    let mut s = SyntheticScene::new(SceneKind::Ramp, 64, 64, 100.0, 8);
    s.velocity = [90.0, 40.0];
    let seq = s.sequence().unwrap();
    let sh = ShutterParams::new(2e-4, 0.012).unwrap();
    let fast = simulate_rscd(&seq, 0.035, &sh, &SynthesisMode::interpolate(64).unwrap()).unwrap();
    let slow = oracle_rscd(&seq, 0.035, &sh, 1024).unwrap();
    assert!(max_abs(&fast, &slow) < 1e-4);
}

#[test]
fn range_errors_name_the_row() {
    let seq = scene(SceneKind::Pan, 0);
    let sh = ShutterParams::new(1e-3, 0.0).unwrap();
    let err = simulate_rs(&seq, 0.001, &sh, &SynthesisMode::default()).unwrap_err();
    assert!(err.to_string().starts_with("row 0"), "{err}");
    assert!(oracle_rscd(&seq, 0.025, &sh, 64).is_err());
}
