use rand::Rng;
use rscd_core::nnkernels::{bilinear_sample, conv2d, deform_conv2d, se_attention, OffsetGrid, SeWeights};

use crate::oracles::{max_abs_diff, max_abs_diff64, naive_bilinear, naive_conv, naive_se, random_weights, rng, signed_frame};
use crate::{Check, Measurement, SuiteConfig};

pub fn reductions(cfg: &SuiteConfig) -> anyhow::Result<Vec<Measurement>> {
    let mut r = rng(cfg.seed ^ 0x6b65_726e);

    // Zero offsets: 20 configurations, the first five with 8 offset groups.
    let mut zero_gap = 0.0f64;
    for trial in 0..20 {
        let groups = if trial < 5 { 8 } else { [1, 2, 4][trial % 3] };
        let cin = groups * r.random_range(1..3);
        let cout = r.random_range(1..6);
        let k = [1, 3, 5][trial % 3];
        let stride = 1 + trial % 2;
        let (w_in, h_in) = (r.random_range(k..12), r.random_range(k..12));
        let f = signed_frame(&mut r, w_in, h_in, cin);
        let w = random_weights(&mut r, cout, cin, k, stride, k / 2);
        let off = OffsetGrid::zeros(w.output_len(w_in)?, w.output_len(h_in)?, groups, k * k)?;
        zero_gap = zero_gap.max(max_abs_diff(conv2d(&f, &w)?.data(), deform_conv2d(&f, &w, &off)?.data()));
    }

    let mut conv_gap = 0.0f64;
    let mut deform_gap = 0.0f64;
    for trial in 0..10 {
        let (cin, cout) = (r.random_range(1..5), r.random_range(1..5));
        let k = [1, 3, 5][trial % 3];
        let stride = 1 + trial % 2;
        let pad = r.random_range(0..=k / 2 + 1);
        let f = signed_frame(&mut r, 8, 8, cin);
        let w = random_weights(&mut r, cout, cin, k, stride, pad);
        conv_gap = conv_gap.max(max_abs_diff64(conv2d(&f, &w)?.data(), &naive_conv(&f, &w, None)));

        let groups = [1, 2, 4, 8][trial % 4];
        let cin = groups * r.random_range(1..3);
        let f = signed_frame(&mut r, 9, 7, cin);
        let w = random_weights(&mut r, cout, cin, 3, stride, 1);
        let (ow, oh) = (w.output_len(9)?, w.output_len(7)?);
        let data = (0..ow * oh * groups * 9 * 2).map(|_| r.random_range(-2.5f32..2.5)).collect();
        let off = OffsetGrid::new(ow, oh, groups, 9, data)?;
        deform_gap = deform_gap.max(max_abs_diff64(deform_conv2d(&f, &w, &off)?.data(), &naive_conv(&f, &w, Some(&off))));
    }

    let mut se_gap = 0.0f64;
    for _ in 0..10 {
        let c = 16 * r.random_range(1..4);
        let red = [1, 4, 16][r.random_range(0..3)];
        let h = c / red;
        let f = signed_frame(&mut r, 6, 5, c);
        let mut v = |n: usize| -> Vec<f32> { (0..n).map(|_| r.random_range(-1.0f32..1.0)).collect() };
        let (w1, b1, w2, b2) = (v(h * c), v(h), v(c * h), v(c));
        let want = naive_se(&f, &w1, &b1, &w2, &b2);
        let se = SeWeights::new(c, red, w1, b1, w2, b2)?;
        se_gap = se_gap.max(max_abs_diff64(se_attention(&f, &se)?.data(), &want));
    }

    let f = signed_frame(&mut r, 11, 9, 3);
    let pts: Vec<[f64; 2]> = (0..200)
        .map(|_| [r.random_range(-2.0..13.0), r.random_range(-2.0..11.0)])
        .collect();
    let got = bilinear_sample(&f, &pts);
    let mut sample_gap = 0.0f64;
    for (p, g) in pts.iter().zip(&got) {
        for (c, v) in g.iter().enumerate() {
            sample_gap = sample_gap.max((v - naive_bilinear(&f, p[0], p[1], c)).abs());
        }
    }

    Ok(vec![
        Measurement::new("zero_offset_vs_conv", zero_gap, Check::Lt(1e-6)),
        Measurement::new("conv2d_vs_naive", conv_gap, Check::Lt(1e-5)),
        Measurement::new("deform_conv2d_vs_naive", deform_gap, Check::Lt(1e-5)),
        Measurement::new("se_attention_vs_naive", se_gap, Check::Lt(1e-5)),
        Measurement::new("bilinear_sample_vs_naive", sample_gap, Check::Lt(1e-5)),
    ])
}
