use std::f64::consts::TAU;

use proptest::prelude::*;
use tsfm_core::metrics::{aggregate, geometric_mean, mase, wql, EvalRecord};
use tsfm_core::regress::{QuantileLevels, QuantilePrediction};
use tsfm_core::synth::{
    gen_harmonic, gen_noise, gen_pattern, harmonic_base_features, HarmonicGrid, SynthKind, SynthSpec,
};

/// Pinball loss summed one `(t, q)` cell at a time.
fn wql_oracle(y: &[f64], values: &[Vec<f64>], levels: &[f64]) -> f64 {
    let mut num = 0.0;
    for t in 0..y.len() {
        for (j, &q) in levels.iter().enumerate() {
            let diff = y[t] - values[t][j];
            let loss = if diff >= 0.0 { q * diff } else { (q - 1.0) * diff };
            num += 2.0 * loss;
        }
    }
    let den: f64 = y.iter().map(|v| v.abs()).sum::<f64>() * levels.len() as f64;
    num / den
}

fn prediction_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=20).prop_flat_map(|h| {
        (
            prop::collection::vec(-50.0f64..50.0, h),
            prop::collection::vec(prop::collection::vec(-60.0f64..60.0, 9), h),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wql_matches_pinball_sum((y, mut values) in prediction_strategy()) {
        for row in &mut values {
            row.sort_by(f64::total_cmp);
        }
        let levels = QuantileLevels::evaluation_grid();
        let pred = QuantilePrediction::new(levels.clone(), values.clone()).unwrap();
        prop_assume!(y.iter().map(|v| v.abs()).sum::<f64>() > 1e-6);
        let got = wql(&y, &pred, &levels).unwrap().unwrap();
        prop_assert!((got - wql_oracle(&y, &values, levels.as_slice())).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_scale_free((y, mut values) in prediction_strategy(), c in 0.01f64..100.0) {
        for row in &mut values {
            row.sort_by(f64::total_cmp);
        }
        let levels = QuantileLevels::evaluation_grid();
        let history: Vec<f64> = (0..30).map(|t| (t as f64 * 0.7).sin() * 10.0 + t as f64).collect();
        let point: Vec<f64> = values.iter().map(|r| r[4]).collect();
        let pred = QuantilePrediction::new(levels.clone(), values.clone()).unwrap();
        let scaled_pred = pred.map_values(|v| v * c);
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let ps: Vec<f64> = point.iter().map(|v| v * c).collect();
        let hs: Vec<f64> = history.iter().map(|v| v * c).collect();
        let m1 = mase(&y, &point, &history, 3).unwrap().unwrap();
        let m2 = mase(&ys, &ps, &hs, 3).unwrap().unwrap();
        prop_assert!((m1 - m2).abs() <= 1e-9 * m1.max(1.0));
        prop_assume!(y.iter().map(|v| v.abs()).sum::<f64>() > 1e-6);
        let w1 = wql(&y, &pred, &levels).unwrap().unwrap();
        let w2 = wql(&ys, &scaled_pred, &levels).unwrap().unwrap();
        prop_assert!((w1 - w2).abs() <= 1e-9 * w1.max(1.0));
    }

    #[test]
    fn geometric_mean_order_free_and_monotone(mut v in prop::collection::vec(0.01f64..100.0, 1..30), i in any::<prop::sample::Index>(), bump in 0.01f64..10.0) {
        let g = geometric_mean(&v).unwrap();
        let mut rev = v.clone();
        rev.reverse();
        prop_assert!((geometric_mean(&rev).unwrap() - g).abs() <= 1e-12 * g);
        let k = i.index(v.len());
        v[k] += bump;
        prop_assert!(geometric_mean(&v).unwrap() > g);
    }

    #[test]
    fn strictly_best_model_ranks_first(scores in prop::collection::vec(0.0f64..10.0, 2..6)) {
        let records: Vec<EvalRecord> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| EvalRecord::relative_to("task", &format!("m{i}"), s + 0.1, s + 0.1, 1.0, 1.0))
            .collect();
        let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(scores.iter().filter(|&&s| s == best).count() == 1);
        let summary = aggregate(&records).unwrap();
        let winner = scores.iter().position(|&s| s == best).unwrap();
        prop_assert_eq!(summary[winner].mean_rank_wql, 1.0);
    }
}

#[test]
fn noise_law_of_large_numbers() {
    let v = gen_noise(0.0, 1.0, 10_000, 12345);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((std - 1.0).abs() < 0.05, "std {std}");
    let shifted = gen_noise(100.0, 10.0, 10_000, 12345);
    let m2 = shifted.iter().sum::<f64>() / shifted.len() as f64;
    assert!((m2 - 100.0).abs() < 0.5);
}

#[test]
fn additive_combo_is_sum_of_parts() {
    let spec = SynthSpec::new(SynthKind::AdditiveCombo, 1000, 99).with("noise_std", 0.5).with("period", 17.0);
    let [trend, seasonal, noise] = spec.additive_parts();
    let combo = spec.values().unwrap();
    let trend_only = SynthSpec::new(SynthKind::LinearTrend, 1000, 0).with("a", 0.01).with("b", 0.0).values().unwrap();
    let seasonal_only = SynthSpec::new(SynthKind::Seasonal, 1000, 0).with("period", 17.0).values().unwrap();
    assert_eq!(trend, trend_only);
    assert_eq!(seasonal, seasonal_only);
    for t in 0..1000 {
        assert_eq!(combo[t], trend[t] + seasonal[t] + noise[t]);
    }
}

#[test]
fn every_kind_is_deterministic() {
    for kind in [
        SynthKind::Noise,
        SynthKind::LinearTrend,
        SynthKind::ExpTrend,
        SynthKind::Seasonal,
        SynthKind::AdditiveCombo,
        SynthKind::MultiplicativeCombo,
        SynthKind::Composite,
        SynthKind::Harmonic,
    ] {
        let spec = SynthSpec::new(kind, 1000, 31);
        let a = gen_pattern(&spec).unwrap();
        let b = gen_pattern(&spec).unwrap();
        assert_eq!(a, b, "{kind:?}");
        assert_eq!(a.len(), 1000);
        assert!(a.observed().all(f64::is_finite));
    }
}

#[test]
fn noise_bits_are_pinned() {
    // guards the generator against accidental algorithm changes
    let v = gen_noise(0.0, 1.0, 4, 0);
    let again = gen_noise(0.0, 1.0, 4, 0);
    assert_eq!(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), again.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn harmonic_identities() {
    let grid = HarmonicGrid { samples_per_cycle: 97, phase: 0.3 };
    let n = 2000;
    let (s, c) = harmonic_base_features(n, grid);
    let s2 = gen_harmonic(2, n, grid);
    let s3 = gen_harmonic(3, n, grid);
    let s4 = gen_harmonic(4, n, grid);
    for t in 0..n {
        assert!((s2[t] - 2.0 * s[t] * c[t]).abs() < 1e-12);
        assert!((s3[t] - (3.0 * s[t] - 4.0 * s[t].powi(3))).abs() < 1e-12);
        assert!((s4[t] - (4.0 * s[t] * c[t].powi(3) - 4.0 * s[t].powi(3) * c[t])).abs() < 1e-12);
    }
    let x = grid.x(5);
    assert!((s[5] - (x).sin()).abs() < 1e-15 && (grid.x(97) - 0.3 - TAU).abs() < 1e-12);
}
