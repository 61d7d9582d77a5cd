//! Uniform-grid univariate series, forecast tasks and context/horizon splitting.
//!
//! Timestamps are never stored per row. A series is `(start, freq, values)` and
//! the timestamp of step `t` is always recomputed from `start` by calendar
//! arithmetic, so rows can not drift off the grid.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, Months, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::FeatureMatrix;

/// Default number of trailing steps kept as regression context.
pub const DEFAULT_MAX_CONTEXT: usize = 4096;

/// Minimum number of observed values any forecasting operation needs.
pub const MIN_OBSERVED: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series `{0}` has no values")]
    EmptySeries(String),
    #[error("unsupported frequency: {0}")]
    UnsupportedFrequency(String),
    #[error("context of series `{id}` has {observed} observed values, need at least {MIN_OBSERVED}")]
    ContextTooShort { id: String, observed: usize },
    #[error("all training targets are missing")]
    AllMissing,
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyUnit {
    Second,
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Quarter,
    Year,
}

/// Sampling frequency: a calendar unit times a positive multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frequency {
    unit: FrequencyUnit,
    multiplier: u32,
}

impl Frequency {
    pub fn new(unit: FrequencyUnit, multiplier: u32) -> Result<Self, SeriesError> {
        if multiplier == 0 {
            return Err(SeriesError::UnsupportedFrequency(format!(
                "{unit:?} with multiplier 0"
            )));
        }
        Ok(Self { unit, multiplier })
    }

    pub fn hourly() -> Self {
        Self { unit: FrequencyUnit::Hour, multiplier: 1 }
    }

    pub fn daily() -> Self {
        Self { unit: FrequencyUnit::Day, multiplier: 1 }
    }

    pub fn unit(&self) -> FrequencyUnit {
        self.unit
    }

    pub fn multiplier(&self) -> u32 {
        self.multiplier
    }

    /// Timestamp `steps` grid steps after `start`.
    ///
    /// Month, quarter and year steps are taken from `start` directly and clamp the
    /// day of month to the target month's length, so 2020-01-31 + 1 month is
    /// 2020-02-29 while + 2 months is 2020-03-31 again.
    pub fn advance(&self, start: NaiveDateTime, steps: i64) -> Option<NaiveDateTime> {
        let n = steps.checked_mul(i64::from(self.multiplier))?;
        let fixed = |secs: i64| {
            n.checked_mul(secs)
                .and_then(Duration::try_seconds)
                .and_then(|d| start.checked_add_signed(d))
        };
        let months = |per: i64| {
            let total = n.checked_mul(per)?;
            let abs = u32::try_from(total.unsigned_abs()).ok()?;
            if total >= 0 {
                start.checked_add_months(Months::new(abs))
            } else {
                start.checked_sub_months(Months::new(abs))
            }
        };
        match self.unit {
            FrequencyUnit::Second => fixed(1),
            FrequencyUnit::Minute => fixed(60),
            FrequencyUnit::Hour => fixed(3_600),
            FrequencyUnit::Day => fixed(86_400),
            FrequencyUnit::Week => fixed(7 * 86_400),
            FrequencyUnit::Month => months(1),
            FrequencyUnit::Quarter => months(3),
            FrequencyUnit::Year => months(12),
        }
    }

    /// Short pandas-style code, e.g. `H`, `15T`, `M`.
    pub fn code(&self) -> String {
        let base = match self.unit {
            FrequencyUnit::Second => "S",
            FrequencyUnit::Minute => "T",
            FrequencyUnit::Hour => "H",
            FrequencyUnit::Day => "D",
            FrequencyUnit::Week => "W",
            FrequencyUnit::Month => "M",
            FrequencyUnit::Quarter => "Q",
            FrequencyUnit::Year => "A",
        };
        if self.multiplier == 1 {
            base.to_string()
        } else {
            format!("{}{}", self.multiplier, base)
        }
    }

    /// Seasonal period used for MASE scaling and the Seasonal Naive baseline.
    ///
    /// The per-unit period is divided by the multiplier when it divides evenly
    /// and is capped so that at least one seasonal difference fits in
    /// `history_len` observations.
    pub fn season_length(&self, history_len: usize) -> usize {
        let base: u32 = match self.unit {
            FrequencyUnit::Second => 3_600,
            FrequencyUnit::Minute => 1_440,
            FrequencyUnit::Hour => 24,
            FrequencyUnit::Day => 7,
            FrequencyUnit::Week => 1,
            FrequencyUnit::Month => 12,
            FrequencyUnit::Quarter => 4,
            FrequencyUnit::Year => 1,
        };
        let m = if self.multiplier > 1 && base.is_multiple_of(self.multiplier) {
            base / self.multiplier
        } else {
            base
        } as usize;
        m.min(history_len.saturating_sub(1)).max(1)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for Frequency {
    type Err = SeriesError;

    /// Accepts an optional integer multiplier followed by one of
    /// `S`, `T`/`min`, `H`, `D`, `W`, `M`, `Q`, `A`/`Y`. Anchors such as
    /// `W-SUN` or `Q-DEC` and the pandas `E`/`S` month-end/start suffixes
    /// (`ME`, `QS`) are accepted and ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unsupported = || SeriesError::UnsupportedFrequency(s.to_string());
        let trimmed = s.trim();
        let head = trimmed.split('-').next().unwrap_or_default();
        let digits_end = head.find(|c: char| !c.is_ascii_digit()).unwrap_or(head.len());
        let (num, code) = head.split_at(digits_end);
        let multiplier = if num.is_empty() {
            1
        } else {
            num.parse::<u32>().map_err(|_| unsupported())?
        };
        let unit = match code {
            "S" | "s" => FrequencyUnit::Second,
            "T" | "min" | "Min" => FrequencyUnit::Minute,
            "H" | "h" => FrequencyUnit::Hour,
            "D" | "d" => FrequencyUnit::Day,
            "W" | "w" => FrequencyUnit::Week,
            "M" | "ME" | "MS" => FrequencyUnit::Month,
            "Q" | "QE" | "QS" => FrequencyUnit::Quarter,
            "A" | "Y" | "AS" | "YS" | "YE" | "A-DEC" => FrequencyUnit::Year,
            _ => return Err(unsupported()),
        };
        Frequency::new(unit, multiplier)
    }
}

impl Serialize for Frequency {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Univariate series on a uniform grid. `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub id: String,
    pub start: NaiveDateTime,
    pub freq: Frequency,
    pub values: Vec<Option<f64>>,
}

impl TimeSeries {
    /// Non-finite inputs are stored as missing.
    pub fn new(
        id: impl Into<String>,
        start: NaiveDateTime,
        freq: Frequency,
        values: Vec<Option<f64>>,
    ) -> Self {
        let values = values
            .into_iter()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect();
        Self { id: id.into(), start, freq, values }
    }

    pub fn from_values(
        id: impl Into<String>,
        start: NaiveDateTime,
        freq: Frequency,
        values: &[f64],
    ) -> Self {
        Self::new(id, start, freq, values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, t: usize) -> Option<NaiveDateTime> {
        self.freq.advance(self.start, i64::try_from(t).ok()?)
    }

    pub fn n_observed(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    /// Sub-series `[from, to)` with its start moved onto the grid position `from`.
    pub fn slice(&self, from: usize, to: usize) -> Option<TimeSeries> {
        if from > to || to > self.len() {
            return None;
        }
        Some(TimeSeries {
            id: self.id.clone(),
            start: self.timestamp(from)?,
            freq: self.freq,
            values: self.values[from..to].to_vec(),
        })
    }
}

/// Checks that the series is non-empty and that every grid step, including one
/// step past the end, is representable. Returns the input unchanged.
pub fn validate_grid(series: TimeSeries) -> Result<TimeSeries, SeriesError> {
    if series.is_empty() {
        return Err(SeriesError::EmptySeries(series.id));
    }
    if series.freq.multiplier == 0 || series.timestamp(series.len()).is_none() {
        return Err(SeriesError::UnsupportedFrequency(format!(
            "{} overflows the calendar for series `{}`",
            series.freq, series.id
        )));
    }
    Ok(series)
}

/// One series to forecast `horizon` steps past its end.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTask {
    pub series: TimeSeries,
    pub horizon: usize,
    pub max_context: usize,
    pub seasonality_m: usize,
}

impl ForecastTask {
    /// Uses the default context cap and the frequency's seasonal period.
    pub fn new(series: TimeSeries, horizon: usize) -> Result<Self, SeriesError> {
        let m = series.freq.season_length(series.len());
        Self::with_options(series, horizon, DEFAULT_MAX_CONTEXT, m)
    }

    pub fn with_options(
        series: TimeSeries,
        horizon: usize,
        max_context: usize,
        seasonality_m: usize,
    ) -> Result<Self, SeriesError> {
        if horizon == 0 {
            return Err(SeriesError::InvalidTask("horizon must be at least 1".into()));
        }
        if max_context == 0 {
            return Err(SeriesError::InvalidTask("max_context must be at least 1".into()));
        }
        if seasonality_m == 0 {
            return Err(SeriesError::InvalidTask("seasonality must be at least 1".into()));
        }
        let series = validate_grid(series)?;
        Ok(Self { series, horizon, max_context, seasonality_m })
    }
}

/// Keeps the last `min(len, max_context)` steps (missing values stay in place)
/// and lists the `horizon` grid timestamps that follow the context.
pub fn split_context_horizon(
    task: &ForecastTask,
) -> Result<(TimeSeries, Vec<NaiveDateTime>), SeriesError> {
    let series = &task.series;
    let n = series.len();
    let from = n - n.min(task.max_context);
    let context = series
        .slice(from, n)
        .ok_or_else(|| SeriesError::UnsupportedFrequency(series.freq.code()))?;
    let observed = context.n_observed();
    if observed < MIN_OBSERVED {
        return Err(SeriesError::ContextTooShort { id: series.id.clone(), observed });
    }
    let future = (0..task.horizon)
        .map(|h| context.timestamp(context.len() + h))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| SeriesError::UnsupportedFrequency(series.freq.code()))?;
    Ok((context, future))
}

/// Features for the context rows and the future rows, before targets are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSplit {
    pub x_train: FeatureMatrix,
    pub x_test: FeatureMatrix,
}

/// Regression-ready table: no missing values anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularSplit {
    pub x_train: FeatureMatrix,
    pub y_train: Vec<f64>,
    pub x_test: FeatureMatrix,
}

impl TabularSplit {
    pub fn new(
        x_train: FeatureMatrix,
        y_train: Vec<f64>,
        x_test: FeatureMatrix,
    ) -> Result<Self, SeriesError> {
        if x_train.n_rows() != y_train.len() {
            return Err(SeriesError::ShapeMismatch(format!(
                "{} training rows but {} targets",
                x_train.n_rows(),
                y_train.len()
            )));
        }
        if x_train.n_cols() != x_test.n_cols() {
            return Err(SeriesError::ShapeMismatch(format!(
                "{} training columns but {} test columns",
                x_train.n_cols(),
                x_test.n_cols()
            )));
        }
        if y_train.iter().any(|y| !y.is_finite()) {
            return Err(SeriesError::ShapeMismatch("non-finite training target".into()));
        }
        Ok(Self { x_train, y_train, x_test })
    }

    pub fn horizon(&self) -> usize {
        self.x_test.n_rows()
    }
}

/// Removes the training rows whose raw target is missing, keeping row order.
pub fn drop_missing_rows(
    features: FeatureSplit,
    y_raw: &[Option<f64>],
) -> Result<TabularSplit, SeriesError> {
    if features.x_train.n_rows() != y_raw.len() {
        return Err(SeriesError::ShapeMismatch(format!(
            "{} training rows but {} raw targets",
            features.x_train.n_rows(),
            y_raw.len()
        )));
    }
    let keep: Vec<usize> = y_raw
        .iter()
        .enumerate()
        .filter_map(|(i, y)| y.map(|_| i))
        .collect();
    if keep.is_empty() {
        return Err(SeriesError::AllMissing);
    }
    let y_train = keep.iter().map(|&i| y_raw[i].unwrap_or_default()).collect();
    let x_train = if keep.len() == y_raw.len() {
        features.x_train
    } else {
        features.x_train.select_rows(&keep)
    };
    TabularSplit::new(x_train, y_train, features.x_test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ts(y: i32, m: u32, d: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn hourly(n: usize) -> TimeSeries {
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        TimeSeries::from_values("s", ts(2021, 1, 1), Frequency::hourly(), &values)
    }

    #[test]
    fn parse_frequency_codes() {
        let cases = [
            ("H", FrequencyUnit::Hour, 1),
            ("15T", FrequencyUnit::Minute, 15),
            ("5min", FrequencyUnit::Minute, 5),
            ("W-SUN", FrequencyUnit::Week, 1),
            ("M", FrequencyUnit::Month, 1),
            ("Q", FrequencyUnit::Quarter, 1),
            ("A", FrequencyUnit::Year, 1),
            ("Y", FrequencyUnit::Year, 1),
            ("10S", FrequencyUnit::Second, 10),
            ("D", FrequencyUnit::Day, 1),
        ];
        for (code, unit, mult) in cases {
            let f: Frequency = code.parse().unwrap();
            assert_eq!((f.unit(), f.multiplier()), (unit, mult), "{code}");
        }
        assert!("X".parse::<Frequency>().is_err());
        assert!("0H".parse::<Frequency>().is_err());
        assert_eq!("15T".parse::<Frequency>().unwrap().code(), "15T");
    }

    #[test]
    fn validate_identity_and_empty() {
        let s = hourly(10);
        assert_eq!(validate_grid(s.clone()).unwrap(), s);
        let empty = TimeSeries::new("e", ts(2021, 1, 1), Frequency::hourly(), vec![]);
        assert_eq!(validate_grid(empty), Err(SeriesError::EmptySeries("e".into())));
    }

    #[test]
    fn month_steps_clamp_day() {
        let f: Frequency = "M".parse().unwrap();
        let start = ts(2020, 1, 31);
        assert_eq!(f.advance(start, 1), Some(ts(2020, 2, 29)));
        assert_eq!(f.advance(start, 2), Some(ts(2020, 3, 31)));
        assert_eq!(f.advance(start, 13), Some(ts(2021, 2, 28)));
        let q: Frequency = "Q".parse().unwrap();
        assert_eq!(q.advance(ts(2019, 11, 30), 1), Some(ts(2020, 2, 29)));
    }

    #[test]
    fn split_examples() {
        let task = ForecastTask::with_options(hourly(800), 200, DEFAULT_MAX_CONTEXT, 24).unwrap();
        let (ctx, fut) = split_context_horizon(&task).unwrap();
        assert_eq!((ctx.len(), fut.len()), (800, 200));
        assert_eq!(fut[0], task.series.timestamp(800).unwrap());

        let task = ForecastTask::with_options(hourly(5000), 10, 4096, 24).unwrap();
        let (ctx, _) = split_context_horizon(&task).unwrap();
        assert_eq!(ctx.len(), 4096);
        assert_eq!(ctx.values[0], Some(904.0));
        assert_eq!(ctx.start, task.series.timestamp(904).unwrap());

        let task = ForecastTask::with_options(hourly(10), 1, 4096, 24).unwrap();
        let (ctx, fut) = split_context_horizon(&task).unwrap();
        assert_eq!((ctx.len(), fut.len()), (10, 1));
    }

    #[test]
    fn truncation_is_idempotent() {
        let task = ForecastTask::with_options(hourly(300), 5, 128, 24).unwrap();
        let (ctx, fut) = split_context_horizon(&task).unwrap();
        let again = ForecastTask::with_options(ctx.clone(), 5, 128, 24).unwrap();
        let (ctx2, fut2) = split_context_horizon(&again).unwrap();
        assert_eq!(ctx, ctx2);
        assert_eq!(fut, fut2);
    }

    #[test]
    fn context_too_short() {
        let mut s = hourly(6);
        s.values = vec![None, Some(1.0), None, None, Some(2.0), None];
        let task = ForecastTask::with_options(s, 2, 4096, 1).unwrap();
        assert!(matches!(
            split_context_horizon(&task),
            Err(SeriesError::ContextTooShort { observed: 2, .. })
        ));
    }

    #[test]
    fn task_validation() {
        assert!(ForecastTask::new(hourly(10), 0).is_err());
        assert!(ForecastTask::with_options(hourly(10), 1, 0, 1).is_err());
        assert!(ForecastTask::with_options(hourly(10), 1, 10, 0).is_err());
    }

    fn split_with(n_train: usize) -> FeatureSplit {
        let x_train = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            (0..n_train).map(|i| vec![i as f64, 1.0]).collect(),
        )
        .unwrap();
        let x_test =
            FeatureMatrix::from_rows(vec!["a".into(), "b".into()], vec![vec![99.0, 1.0]]).unwrap();
        FeatureSplit { x_train, x_test }
    }

    #[test]
    fn drop_missing_examples() {
        let y: Vec<Option<f64>> = (0..100).map(|i| Some(i as f64)).collect();
        let out = drop_missing_rows(split_with(100), &y).unwrap();
        assert_eq!(out.x_train.n_rows(), 100);

        let y: Vec<Option<f64>> =
            (0..100).map(|i| if i % 10 == 3 { None } else { Some(i as f64) }).collect();
        let out = drop_missing_rows(split_with(100), &y).unwrap();
        assert_eq!(out.x_train.n_rows(), 90);
        assert_eq!(out.x_train.n_cols(), 2);
        assert_eq!(out.x_test.n_rows(), 1);
        // relative order and row/target alignment
        for (row, y) in out.x_train.rows().zip(&out.y_train) {
            assert_eq!(row[0], *y);
        }
        assert!(out.y_train.windows(2).all(|w| w[0] < w[1]));

        let y = vec![None; 4];
        assert_eq!(drop_missing_rows(split_with(4), &y), Err(SeriesError::AllMissing));
    }

    #[test]
    fn season_lengths() {
        let h = Frequency::hourly();
        assert_eq!(h.season_length(1000), 24);
        assert_eq!(h.season_length(10), 9);
        let t: Frequency = "15T".parse().unwrap();
        assert_eq!(t.season_length(10_000), 96);
        let s: Frequency = "S".parse().unwrap();
        assert_eq!(s.season_length(500), 499);
        assert_eq!("W".parse::<Frequency>().unwrap().season_length(100), 1);
    }
}
