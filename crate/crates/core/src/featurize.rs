//! Timestamp featurization.
//!
//! Each time step becomes one row made of up to three blocks, always in this
//! order: calendar (8 cyclic components as cos/sin pairs plus the raw year),
//! automatic seasonal pairs for the detected frequencies, and the running index.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seasonal::{seasonal_features, SeasonalitySet};
use crate::series::{FeatureSplit, TimeSeries};

pub const CALENDAR_WIDTH: usize = 17;
pub const DEFAULT_K_SEASONAL: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("cyclic period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("feature configuration enables no feature block")]
    ConfigEmpty,
    #[error("seasonalities must be supplied exactly when seasonal features are enabled")]
    SeasonalityMismatch,
    #[error("timestamp out of calendar range at step {0}")]
    TimestampOverflow(usize),
    #[error("feature matrix shape: {0}")]
    Shape(String),
}

/// Dense row-major feature table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(column_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        let n_cols = column_names.len();
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(FeatureError::Shape(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self { column_names, n_rows, data })
    }

    /// Horizontal concatenation; all blocks must have the same row count.
    pub fn hstack(blocks: &[FeatureMatrix]) -> Result<Self, FeatureError> {
        let n_rows = blocks.first().map_or(0, |b| b.n_rows);
        if blocks.iter().any(|b| b.n_rows != n_rows) {
            return Err(FeatureError::Shape("blocks differ in row count".into()));
        }
        let column_names: Vec<String> =
            blocks.iter().flat_map(|b| b.column_names.iter().cloned()).collect();
        let mut data = Vec::with_capacity(n_rows * column_names.len());
        for r in 0..n_rows {
            for b in blocks {
                data.extend_from_slice(b.row(r));
            }
        }
        Ok(Self { column_names, n_rows, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { column_names: self.column_names.clone(), n_rows: idx.len(), data }
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Which feature blocks to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub use_calendar: bool,
    pub use_seasonal: bool,
    pub use_index: bool,
    pub k_seasonal: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { use_calendar: true, use_seasonal: true, use_index: true, k_seasonal: DEFAULT_K_SEASONAL }
    }
}

impl FeatureConfig {
    pub fn index_only() -> Self {
        Self { use_calendar: false, use_seasonal: false, use_index: true, ..Self::default() }
    }

    pub fn calendar_index() -> Self {
        Self { use_seasonal: false, ..Self::default() }
    }

    /// Parses a comma separated subset of `calendar`, `seasonal`, `index`.
    pub fn from_flags(flags: &str, k_seasonal: usize) -> Result<Self, String> {
        let mut cfg = Self { use_calendar: false, use_seasonal: false, use_index: false, k_seasonal };
        for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag {
                "calendar" => cfg.use_calendar = true,
                "seasonal" => cfg.use_seasonal = true,
                "index" => cfg.use_index = true,
                other => return Err(format!("unknown feature block `{other}`")),
            }
        }
        if !(cfg.use_calendar || cfg.use_seasonal || cfg.use_index) {
            return Err("at least one feature block is required".into());
        }
        Ok(cfg)
    }

    pub fn n_cols(&self) -> usize {
        CALENDAR_WIDTH * usize::from(self.use_calendar)
            + 2 * self.k_seasonal * usize::from(self.use_seasonal)
            + usize::from(self.use_index)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.use_calendar {
            parts.push("calendar");
        }
        if self.use_seasonal {
            parts.push("seasonal");
        }
        if self.use_index {
            parts.push("index");
        }
        parts.join("+")
    }
}

/// `(cos(2π·position/period), sin(2π·position/period))`.
pub fn cyclic_encode(position: f64, period: f64) -> Result<(f64, f64), FeatureError> {
    if period.is_nan() || period <= 0.0 {
        return Err(FeatureError::NonPositivePeriod(period));
    }
    let (s, c) = (TAU * position / period).sin_cos();
    Ok((c, s))
}

/// Zero-based calendar positions and their natural periods.
const CALENDAR_COMPONENTS: [(&str, f64); 8] = [
    ("second_of_minute", 60.0),
    ("minute_of_hour", 60.0),
    ("hour_of_day", 24.0),
    ("day_of_week", 7.0),
    ("day_of_month", 31.0),
    ("day_of_year", 366.0),
    ("week_of_year", 53.0),
    ("month_of_year", 12.0),
];

fn calendar_positions(ts: &NaiveDateTime) -> [u32; 8] {
    [
        ts.second(),
        ts.minute(),
        ts.hour(),
        ts.weekday().num_days_from_monday(),
        ts.day0(),
        ts.ordinal0(),
        ts.iso_week().week0(),
        ts.month0(),
    ]
}

pub fn calendar_column_names() -> Vec<String> {
    let mut names: Vec<String> = CALENDAR_COMPONENTS
        .iter()
        .flat_map(|(name, _)| [format!("{name}_cos"), format!("{name}_sin")])
        .collect();
    names.push("year".into());
    names
}

/// 16 cyclic values (cos, sin per component) followed by the calendar year.
pub fn calendar_features(ts: &NaiveDateTime) -> [f64; CALENDAR_WIDTH] {
    let mut out = [0.0; CALENDAR_WIDTH];
    for (i, (pos, (_, period))) in calendar_positions(ts).iter().zip(CALENDAR_COMPONENTS).enumerate() {
        let (s, c) = (TAU * f64::from(*pos) / period).sin_cos();
        out[2 * i] = c;
        out[2 * i + 1] = s;
    }
    out[16] = f64::from(ts.year());
    out
}

/// `[0, 1, …, n−1]`.
pub fn running_index(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn build_block(
    stamps: &[NaiveDateTime],
    first_index: usize,
    seasonalities: Option<&SeasonalitySet>,
    config: &FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let n = stamps.len();
    let mut blocks = Vec::with_capacity(3);
    if config.use_calendar {
        let rows = stamps.iter().map(|ts| calendar_features(ts).to_vec()).collect();
        blocks.push(FeatureMatrix::from_rows(calendar_column_names(), rows)?);
    }
    let indices: Vec<f64> = running_index(first_index + n).split_off(first_index);
    if let Some(set) = seasonalities {
        blocks.push(seasonal_features(set, &indices, config.k_seasonal));
    }
    if config.use_index {
        let rows = indices.iter().map(|&i| vec![i]).collect();
        blocks.push(FeatureMatrix::from_rows(vec!["running_index".into()], rows)?);
    }
    FeatureMatrix::hstack(&blocks)
}

/// Feature rows for every context step and for every future timestamp.
///
/// The running index starts at 0 on the first context step and continues into
/// the future rows, and the seasonal block is evaluated at that index.
pub fn assemble_features(
    context: &TimeSeries,
    future_stamps: &[NaiveDateTime],
    seasonalities: Option<&SeasonalitySet>,
    config: &FeatureConfig,
) -> Result<FeatureSplit, FeatureError> {
    if !(config.use_calendar || config.use_seasonal || config.use_index) {
        return Err(FeatureError::ConfigEmpty);
    }
    if config.use_seasonal != seasonalities.is_some() {
        return Err(FeatureError::SeasonalityMismatch);
    }
    let train_stamps = (0..context.len())
        .map(|t| context.timestamp(t).ok_or(FeatureError::TimestampOverflow(t)))
        .collect::<Result<Vec<_>, _>>()?;
    let x_train = build_block(&train_stamps, 0, seasonalities, config)?;
    let x_test = build_block(future_stamps, context.len(), seasonalities, config)?;
    Ok(FeatureSplit { x_train, x_test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Frequency;
    use chrono::{Duration, NaiveDate};

    fn at(y: i32, m: u32, d: u32, h: u32, mi: u32, s: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, mi, s).unwrap()
    }

    #[test]
    fn cyclic_examples() {
        let (c, s) = cyclic_encode(0.0, 24.0).unwrap();
        assert_eq!((c, s), (1.0, 0.0));
        let (c, s) = cyclic_encode(6.0, 24.0).unwrap();
        assert!(c.abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
        let (c, s) = cyclic_encode(7.0, 7.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && s.abs() < 1e-12);
        assert_eq!(cyclic_encode(1.0, 0.0), Err(FeatureError::NonPositivePeriod(0.0)));
        assert!(cyclic_encode(1.0, -3.0).is_err());
    }

    #[test]
    fn new_year_2021() {
        let f = calendar_features(&at(2021, 1, 1, 0, 0, 0));
        for pair in 0..3 {
            assert_eq!((f[2 * pair], f[2 * pair + 1]), (1.0, 0.0));
        }
        let (c, s) = cyclic_encode(4.0, 7.0).unwrap();
        assert_eq!((f[6], f[7]), (c, s));
        assert_eq!(f[16], 2021.0);
        let prev = calendar_features(&at(2020, 12, 31, 0, 0, 0));
        assert_eq!(f[16] - prev[16], 1.0);
    }

    #[test]
    fn one_period_apart_components_match() {
        let base = at(2022, 3, 14, 15, 9, 26);
        let cases = [
            (Duration::minutes(1), 0),
            (Duration::hours(1), 1),
            (Duration::days(1), 2),
            (Duration::weeks(1), 3),
        ];
        let a = calendar_features(&base);
        for (shift, comp) in cases {
            let b = calendar_features(&(base + shift));
            assert!((a[2 * comp] - b[2 * comp]).abs() < 1e-12);
            assert!((a[2 * comp + 1] - b[2 * comp + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn running_index_examples() {
        assert_eq!(running_index(5), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(running_index(1), vec![0.0]);
    }

    fn context(n: usize) -> TimeSeries {
        let v: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        TimeSeries::from_values("c", at(2021, 1, 1, 0, 0, 0), Frequency::hourly(), &v)
    }

    fn future(ctx: &TimeSeries, h: usize) -> Vec<NaiveDateTime> {
        (0..h).map(|j| ctx.timestamp(ctx.len() + j).unwrap()).collect()
    }

    #[test]
    fn column_counts() {
        let ctx = context(10);
        let fut = future(&ctx, 3);
        let set = SeasonalitySet::new(vec![0.25], vec![1.0], 5);
        let full = assemble_features(&ctx, &fut, Some(&set), &FeatureConfig::default()).unwrap();
        assert_eq!(full.x_train.n_cols(), 28);
        assert_eq!(full.x_test.n_cols(), 28);
        let idx = assemble_features(&ctx, &fut, None, &FeatureConfig::index_only()).unwrap();
        assert_eq!(idx.x_train.n_cols(), 1);
        assert_eq!(idx.x_test.column(0), vec![10.0, 11.0, 12.0]);
        let ci = assemble_features(&ctx, &fut, None, &FeatureConfig::calendar_index()).unwrap();
        assert_eq!(ci.x_train.n_cols(), 18);
        assert_eq!(ci.x_train.column_names().last().unwrap(), "running_index");
    }

    #[test]
    fn seasonal_block_uses_global_index() {
        let ctx = context(4);
        let fut = future(&ctx, 2);
        let set = SeasonalitySet::new(vec![0.25], vec![1.0], 1);
        let cfg = FeatureConfig { use_calendar: false, use_seasonal: true, use_index: false, k_seasonal: 1 };
        let split = assemble_features(&ctx, &fut, Some(&set), &cfg).unwrap();
        // t = 2 → (cos π, sin π); t = 5 → (cos 2.5π, sin 2.5π)
        assert!((split.x_train.row(2)[0] + 1.0).abs() < 1e-12);
        assert!(split.x_train.row(2)[1].abs() < 1e-12);
        assert!(split.x_test.row(1)[0].abs() < 1e-12);
        assert!((split.x_test.row(1)[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_errors() {
        let ctx = context(4);
        let fut = future(&ctx, 1);
        let none = FeatureConfig { use_calendar: false, use_seasonal: false, use_index: false, k_seasonal: 5 };
        assert_eq!(assemble_features(&ctx, &fut, None, &none), Err(FeatureError::ConfigEmpty));
        assert_eq!(
            assemble_features(&ctx, &fut, None, &FeatureConfig::default()),
            Err(FeatureError::SeasonalityMismatch)
        );
        assert!(FeatureConfig::from_flags("", 5).is_err());
        assert!(FeatureConfig::from_flags("calendar,bogus", 5).is_err());
        assert_eq!(FeatureConfig::from_flags("index", 5).unwrap(), FeatureConfig::index_only());
    }
}
