//! Seeded synthetic datasets.

use std::f64::consts::TAU;

use chrono::NaiveDate;
use tsfm_core::series::{Frequency, TimeSeries};
use tsfm_core::synth::{
    gen_pattern, gen_random_composite, sub_seed, SynthKind, SynthSpec, XorShift64Star,
    QUALITATIVE_CONTEXT, QUALITATIVE_LENGTH,
};

use crate::runner::EvalTask;

/// Periods (in hours) of the secondary component; none divides a day or a week.
pub const OFF_CALENDAR_PERIODS: [f64; 6] = [7.0, 10.5, 17.0, 31.0, 45.5, 63.0];

pub const PERIODIC_HORIZON: usize = 48;
pub const PERIODIC_LENGTH: usize = 24 * 7 * 5 + PERIODIC_HORIZON;

fn suite_start() -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(2021, 3, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time")
}

/// One hourly series: level, gentle linear trend, a daily cycle, one
/// off-calendar cycle and Gaussian noise.
pub fn periodic_trend_series(index: usize, seed: u64) -> TimeSeries {
    let mut rng = XorShift64Star::new(sub_seed(seed, index as u64));
    let level = rng.uniform(20.0, 60.0);
    let slope = rng.uniform(-0.01, 0.01);
    let daily_amp = rng.uniform(2.0, 5.0);
    let daily_phase = rng.uniform(0.0, TAU);
    let period = OFF_CALENDAR_PERIODS[index % OFF_CALENDAR_PERIODS.len()];
    let amp = rng.uniform(2.0, 5.0);
    let phase = rng.uniform(0.0, TAU);
    let noise_std = rng.uniform(0.2, 0.6);
    let values: Vec<f64> = (0..PERIODIC_LENGTH)
        .map(|t| {
            let t_f = t as f64;
            let (z, _) = rng.normal_pair();
            level
                + slope * t_f
                + daily_amp * (TAU * t_f / 24.0 + daily_phase).sin()
                + amp * (TAU * t_f / period + phase).sin()
                + noise_std * z
        })
        .collect();
    TimeSeries::from_values(format!("periodic-{index:02}"), suite_start(), Frequency::hourly(), &values)
}

/// The periodic-plus-trend suite used by the feature ablation.
pub fn periodic_trend_suite(n_series: usize, seed: u64) -> Vec<EvalTask> {
    (0..n_series)
        .map(|i| {
            let s = periodic_trend_series(i, seed);
            EvalTask::new(format!("periodic_trend/{}", s.id), s, PERIODIC_HORIZON)
        })
        .collect()
}

/// Every generator kind at the qualitative length, forecasting the last
/// `QUALITATIVE_LENGTH − QUALITATIVE_CONTEXT` points from the first
/// `QUALITATIVE_CONTEXT`.
pub fn qualitative_suite(seed: u64) -> Vec<EvalTask> {
    let kinds = [
        SynthKind::Noise,
        SynthKind::LinearTrend,
        SynthKind::ExpTrend,
        SynthKind::Seasonal,
        SynthKind::AdditiveCombo,
        SynthKind::MultiplicativeCombo,
        SynthKind::Composite,
        SynthKind::Harmonic,
    ];
    kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let spec = SynthSpec::new(kind, QUALITATIVE_LENGTH, sub_seed(seed, i as u64));
            let s = gen_pattern(&spec).expect("default parameters are valid");
            EvalTask::new(format!("qualitative/{}", s.id), s, QUALITATIVE_LENGTH - QUALITATIVE_CONTEXT)
        })
        .collect()
}

/// Random composite sinusoids, `n` points each, forecasting the last `horizon`.
pub fn composite_suite(n_series: usize, n: usize, horizon: usize, seed: u64) -> Vec<EvalTask> {
    (0..n_series)
        .map(|i| {
            let c = gen_random_composite(n, sub_seed(seed, i as u64)).expect("n is large enough");
            let id = format!("composite-{i:02}");
            let s = TimeSeries::from_values(id.clone(), suite_start(), Frequency::hourly(), &c.signal);
            EvalTask::new(format!("composite/{id}"), s, horizon)
        })
        .collect()
}

/// `sin(n·x)` for `n = 1..=4` on the default harmonic grid.
pub fn harmonic_suite(n: usize, horizon: usize) -> Vec<EvalTask> {
    (1..=4u32)
        .map(|mult| {
            let spec = SynthSpec::new(SynthKind::Harmonic, n, 0).with("multiplier", f64::from(mult));
            let mut s = gen_pattern(&spec).expect("valid harmonic");
            s.id = format!("sin{mult}x");
            EvalTask::new(format!("harmonic/{}", s.id), s, horizon)
        })
        .collect()
}

/// All synthetic suites together.
pub fn full_synthetic_suite(seed: u64) -> Vec<EvalTask> {
    let mut tasks = periodic_trend_suite(12, seed);
    tasks.extend(qualitative_suite(seed));
    tasks.extend(composite_suite(8, 512, 64, seed));
    tasks.extend(harmonic_suite(600, 100));
    tasks
}

/// A long hourly series for the context-length study.
pub fn long_series(n: usize, seed: u64) -> TimeSeries {
    let mut rng = XorShift64Star::new(sub_seed(seed, 99));
    let values: Vec<f64> = (0..n)
        .map(|t| {
            let t_f = t as f64;
            let (z, _) = rng.normal_pair();
            30.0 + 0.001 * t_f + 4.0 * (TAU * t_f / 24.0).sin() + 2.5 * (TAU * t_f / 168.0).cos()
                + 1.5 * (TAU * t_f / 17.0).sin()
                + 0.5 * z
        })
        .collect();
    TimeSeries::from_values(format!("long-{n}"), suite_start(), Frequency::hourly(), &values)
}
