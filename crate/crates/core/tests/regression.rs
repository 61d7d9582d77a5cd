use chrono::NaiveDate;
use proptest::prelude::*;
use tsfm_core::featurize::{FeatureConfig, FeatureMatrix};
use tsfm_core::regress::{
    ensemble_quantiles, fit_predict, knn_quantile_fit_predict, neighbor_count, power_transform, run_pipeline,
    z_normalize, KnnRegressor, QuantileLevels, QuantilePrediction, RegressorSpec, SeasonalNaive, BOX_COX_LAMBDAS,
};
use tsfm_core::series::{ForecastTask, Frequency, TabularSplit, TimeSeries};
use tsfm_core::synth::{gen_noise, XorShift64Star};

/// Box–Cox profile likelihood written from the textbook formula with `powf`.
fn likelihood_oracle(x: &[f64], lambda: f64) -> f64 {
    let t: Vec<f64> = x.iter().map(|&v| if lambda == 0.0 { v.ln() } else { (v.powf(lambda) - 1.0) / lambda }).collect();
    let n = t.len() as f64;
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    -0.5 * n * var.ln() + (lambda - 1.0) * x.iter().map(|v| v.ln()).sum::<f64>()
}

#[test]
fn lognormal_selects_lambda_near_zero() {
    let y: Vec<f64> = gen_noise(1.0, 0.6, 512, 2024).into_iter().map(f64::exp).collect();
    let (_, t) = power_transform(&y);
    assert!(t.lambda.abs() <= 0.3, "lambda {}", t.lambda);
    let best = BOX_COX_LAMBDAS
        .iter()
        .copied()
        .max_by(|a, b| likelihood_oracle(&y, *a).total_cmp(&likelihood_oracle(&y, *b)))
        .unwrap();
    assert_eq!(t.lambda, best);
}

#[test]
fn grid_mle_matches_brute_force_on_skewed_data() {
    for seed in 0..20 {
        let y: Vec<f64> = gen_noise(0.0, 1.0, 200, seed).into_iter().map(|v| (v * 0.3 + 2.0).powi(3)).collect();
        let (_, t) = power_transform(&y);
        let x: Vec<f64> = y.iter().map(|v| v + t.shift).collect();
        let best = BOX_COX_LAMBDAS
            .iter()
            .copied()
            .max_by(|a, b| likelihood_oracle(&x, *a).total_cmp(&likelihood_oracle(&x, *b)))
            .unwrap();
        assert!((t.lambda - best).abs() < 1e-12, "seed {seed}: {} vs {best}", t.lambda);
    }
}

proptest! {
    #[test]
    fn znorm_round_trip(y in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let (z, t) = z_normalize(&y);
        for (orig, zi) in y.iter().zip(&z) {
            prop_assert!((t.inverse(*zi) - orig).abs() <= 1e-12 * orig.abs().max(1.0) * 1e3);
        }
    }

    #[test]
    fn power_round_trip(y in prop::collection::vec(-100.0f64..100.0, 2..200)) {
        let (z, t) = power_transform(&y);
        for (orig, zi) in y.iter().zip(&z) {
            prop_assert!((t.inverse(*zi) - orig).abs() < 1e-9, "{} -> {} (lambda {})", orig, t.inverse(*zi), t.lambda);
        }
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
    FeatureMatrix::from_rows(names, rows).unwrap()
}

#[test]
fn knn_median_within_neighbor_hull() {
    let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..100).map(|i| 3.0 * i as f64 - 7.0).collect();
    let queries = [-5.0, 0.5, 17.25, 50.0, 98.7, 130.0];
    let split = TabularSplit::new(matrix(x.clone()), y.clone(), matrix(queries.iter().map(|&q| vec![q]).collect())).unwrap();
    let levels = QuantileLevels::fine_grid();
    let out = knn_quantile_fit_predict(&split, &levels).unwrap();
    let k = neighbor_count(100);

    // brute force: standardize with the training mean/std, then scan every row
    let mean = 49.5;
    let std = (x.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / 100.0).sqrt();
    for (row, &q) in out.iter().zip(&queries) {
        let mut d: Vec<(f64, usize)> = (0..100).map(|i| (((x[i][0] - q) / std).abs(), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let targets: Vec<f64> = d[..k].iter().map(|&(_, i)| y[i]).collect();
        let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let median = row[levels.position(0.5).unwrap()];
        assert!(lo <= median && median <= hi, "query {q}: {median} not in [{lo}, {hi}]");
        assert!(row.iter().all(|v| targets.contains(v)));
    }
}

#[test]
fn knn_is_deterministic_with_ties() {
    // every training row equidistant from the query
    let x: Vec<Vec<f64>> = (0..16).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
    let y: Vec<f64> = (0..16).map(|i| i as f64).collect();
    let split = TabularSplit::new(matrix(x), y, matrix(vec![vec![0.0]])).unwrap();
    let a = knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()).unwrap();
    for _ in 0..5 {
        assert_eq!(knn_quantile_fit_predict(&split, &QuantileLevels::fine_grid()).unwrap(), a);
    }
    // lowest row indices win the tie: 0..4
    assert!(a[0].iter().all(|v| *v <= 3.0));
}

fn hourly(values: Vec<f64>) -> TimeSeries {
    let start = NaiveDate::from_ymd_opt(2022, 1, 3).unwrap().and_hms_opt(0, 0, 0).unwrap();
    TimeSeries::from_values("h", start, Frequency::hourly(), &values)
}

#[test]
fn seasonal_naive_backend_on_split_ignores_features() {
    let split = TabularSplit::new(
        matrix((0..6).map(|i| vec![i as f64 * 1000.0]).collect()),
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        matrix(vec![vec![-1.0], vec![1e9], vec![0.0]]),
    )
    .unwrap();
    let f = fit_predict(&SeasonalNaive { season: Some(3) }, &split, &QuantileLevels::fine_grid()).unwrap();
    assert_eq!(f.prediction.level(0.5).unwrap(), vec![4.0, 5.0, 6.0]);
    assert_eq!(f.repaired_rows, 0);
}

#[test]
fn periodic_series_seasonal_naive_has_zero_error() {
    let pattern = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0];
    let v: Vec<f64> = (0..140).map(|t| pattern[t % 7]).collect();
    let truth: Vec<f64> = (140..200).map(|t| pattern[t % 7]).collect();
    let task = ForecastTask::with_options(hourly(v), 60, 4096, 7).unwrap();
    let out = run_pipeline(&task, &FeatureConfig::default(), &SeasonalNaive::default(), &QuantileLevels::fine_grid()).unwrap();
    assert_eq!(out.prediction.level(0.5).unwrap(), truth);
}

#[test]
fn pipeline_outputs_are_monotone_and_finite() {
    let levels = QuantileLevels::fine_grid();
    let mut rng = XorShift64Star::new(77);
    for case in 0..6 {
        let n = 120 + 40 * case;
        let v: Vec<f64> = (0..n)
            .map(|t| 50.0 + 0.2 * t as f64 + 10.0 * (t as f64 * 0.26).sin() + rng.uniform(-3.0, 3.0) - 60.0 * (case % 2) as f64)
            .collect();
        let task = ForecastTask::with_options(hourly(v), 24, 4096, 24).unwrap();
        for cfg in [FeatureConfig::default(), FeatureConfig::index_only(), FeatureConfig::calendar_index()] {
            let out = run_pipeline(&task, &cfg, &KnnRegressor, &levels).unwrap();
            assert!(out.prediction.is_monotone());
            assert!(out.prediction.values.iter().flatten().all(|v| v.is_finite()));
            assert_eq!(out.prediction.horizon(), 24);
        }
    }
}

#[test]
fn ensembling_degenerate_copy_is_identity() {
    let levels = QuantileLevels::fine_grid();
    let d = QuantilePrediction::degenerate(levels, &[1.0, -3.5, 8.25]);
    assert_eq!(ensemble_quantiles(&d, &d).unwrap(), d);
}

#[test]
fn spec_builds_backends() {
    let knn = RegressorSpec::Knn.build().unwrap();
    assert_eq!(knn.name(), "knn");
    let naive = RegressorSpec::SeasonalNaive { season: None }.build().unwrap();
    assert_eq!(naive.name(), "seasonal_naive");
}
