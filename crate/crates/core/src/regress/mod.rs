//! Probabilistic regression on featurized series.
//!
//! Every backend answers the same question: given `(x_train, y_train)` and the
//! future rows `x_test`, return one quantile curve per future row on a fixed
//! level grid. [`fit_predict`] wraps a backend and guarantees the returned
//! curves are finite, correctly shaped and non-decreasing.

mod external;
mod knn;
mod naive;
mod pipeline;
mod transform;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::FeatureError;
use crate::series::{SeriesError, TabularSplit, TimeSeries};

pub use external::{encode_request, ExternalRegressor, FitPredictRequest, FitPredictResponse, FIT_PREDICT_PATH};
pub use knn::{knn_quantile_fit_predict, neighbor_count, KnnRegressor};
pub use naive::{seasonal_naive_forecast, SeasonalNaive};
pub use pipeline::{run_pipeline, PipelineOutput};
pub use transform::{power_transform, z_normalize, TargetTransform, TransformKind, BOX_COX_LAMBDAS};

#[derive(Debug, Error)]
pub enum RegressError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("invalid quantile levels: {0}")]
    InvalidLevels(String),
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("quantile values must be finite and non-decreasing per row")]
    NonMonotone,
    #[error("median point forecast needs the 0.5 quantile level")]
    MissingMedianLevel,
    #[error("backend failure: {0}")]
    BackendFailure(String),
    #[error("invalid regressor spec: {0}")]
    InvalidSpec(String),
}

/// Strictly increasing quantile levels inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self, RegressError> {
        if levels.is_empty() {
            return Err(RegressError::InvalidLevels("no levels".into()));
        }
        if levels.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(RegressError::InvalidLevels(format!("{levels:?} not all in (0, 1)")));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RegressError::InvalidLevels(format!("{levels:?} not strictly increasing")));
        }
        Ok(Self(levels))
    }

    /// 0.05, 0.10, …, 0.95.
    pub fn fine_grid() -> Self {
        Self((1..20).map(|i| i as f64 / 20.0).collect())
    }

    /// 0.1, 0.2, …, 0.9.
    pub fn evaluation_grid() -> Self {
        Self((1..10).map(|i| i as f64 / 10.0).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, q: f64) -> Option<usize> {
        self.0.iter().position(|&l| (l - q).abs() < 1e-9)
    }
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self::fine_grid()
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = RegressError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(l: QuantileLevels) -> Self {
        l.0
    }
}

/// Row `h` holds the quantile curve of horizon step `h` on `levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePrediction {
    pub levels: QuantileLevels,
    pub values: Vec<Vec<f64>>,
}

impl QuantilePrediction {
    pub fn new(levels: QuantileLevels, values: Vec<Vec<f64>>) -> Result<Self, RegressError> {
        check_shape(&values, levels.len())?;
        if values
            .iter()
            .any(|row| row.iter().any(|v| !v.is_finite()) || row.windows(2).any(|w| w[0] > w[1]))
        {
            return Err(RegressError::NonMonotone);
        }
        Ok(Self { levels, values })
    }

    /// Sorts any row whose quantiles cross; returns the number of rows repaired.
    pub fn repaired(levels: QuantileLevels, mut values: Vec<Vec<f64>>) -> Result<(Self, usize), RegressError> {
        check_shape(&values, levels.len())?;
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RegressError::BackendFailure("non-finite quantile value".into()));
        }
        let mut repaired = 0;
        for row in &mut values {
            if row.windows(2).any(|w| w[0] > w[1]) {
                row.sort_by(f64::total_cmp);
                repaired += 1;
            }
        }
        Ok((Self { levels, values }, repaired))
    }

    /// Same value `v[h]` at every level.
    pub fn degenerate(levels: QuantileLevels, points: &[f64]) -> Self {
        let values = points.iter().map(|&v| vec![v; levels.len()]).collect();
        Self { levels, values }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn is_monotone(&self) -> bool {
        self.values.iter().all(|row| row.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Values at level `q` for every horizon step.
    pub fn level(&self, q: f64) -> Option<Vec<f64>> {
        let j = self.levels.position(q)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|row| row.iter().map(|&v| f(v)).collect()).collect();
        Self { levels: self.levels.clone(), values }
    }
}

fn check_shape(values: &[Vec<f64>], width: usize) -> Result<(), RegressError> {
    if let Some((h, row)) = values.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(RegressError::ShapeMismatch(format!(
            "row {h} has {} quantiles, expected {width}",
            row.len()
        )));
    }
    Ok(())
}

/// A probabilistic tabular regressor.
pub trait Regressor: Send + Sync {
    fn name(&self) -> &str;

    /// Raw `H × |levels|` quantile values for `split.x_test`. May cross; [`fit_predict`] repairs.
    fn predict_quantiles(&self, split: &TabularSplit, levels: &QuantileLevels) -> Result<Vec<Vec<f64>>, RegressError>;

    /// Backends that forecast directly from the raw context (ignoring features
    /// and target transforms) return `Some`.
    fn forecast_series(
        &self,
        _context: &TimeSeries,
        _horizon: usize,
        _season: usize,
        _levels: &QuantileLevels,
    ) -> Option<QuantilePrediction> {
        None
    }
}

/// Output of one backend call, after monotonicity repair.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub prediction: QuantilePrediction,
    pub repaired_rows: usize,
}

pub fn fit_predict(
    regressor: &dyn Regressor,
    split: &TabularSplit,
    levels: &QuantileLevels,
) -> Result<Fitted, RegressError> {
    let raw = regressor.predict_quantiles(split, levels)?;
    if raw.len() != split.horizon() {
        return Err(RegressError::ShapeMismatch(format!(
            "{} returned {} rows for {} test rows",
            regressor.name(),
            raw.len(),
            split.horizon()
        )));
    }
    let (prediction, repaired_rows) = QuantilePrediction::repaired(levels.clone(), raw)?;
    Ok(Fitted { prediction, repaired_rows })
}

/// Level-wise average of two quantile predictions.
pub fn ensemble_quantiles(a: &QuantilePrediction, b: &QuantilePrediction) -> Result<QuantilePrediction, RegressError> {
    if a.levels != b.levels || a.horizon() != b.horizon() {
        return Err(RegressError::ShapeMismatch(format!(
            "cannot ensemble {}×{} with {}×{}",
            a.horizon(),
            a.levels.len(),
            b.horizon(),
            b.levels.len()
        )));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| 0.5 * (x + y)).collect())
        .collect();
    Ok(QuantilePrediction::repaired(a.levels.clone(), values)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointMode {
    #[default]
    Median,
    Mean,
}

impl std::str::FromStr for PointMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(Self::Median),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown point mode `{other}`")),
        }
    }
}

/// Median (the 0.5 level) or the mean of the quantile function, integrated
/// with the trapezoid rule over the level range.
pub fn point_forecast(pred: &QuantilePrediction, mode: PointMode) -> Result<Vec<f64>, RegressError> {
    match mode {
        PointMode::Median => pred.level(0.5).ok_or(RegressError::MissingMedianLevel),
        PointMode::Mean => {
            let levels = pred.levels.as_slice();
            let span = levels[levels.len() - 1] - levels[0];
            Ok(pred
                .values
                .iter()
                .map(|row| {
                    if span <= 0.0 {
                        return row[0];
                    }
                    let area: f64 = levels
                        .windows(2)
                        .zip(row.windows(2))
                        .map(|(l, v)| 0.5 * (l[1] - l[0]) * (v[0] + v[1]))
                        .sum();
                    area / span
                })
                .collect())
        }
    }
}

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(60);

/// Which backend to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorSpec {
    /// `season` overrides the task's seasonal period.
    SeasonalNaive { season: Option<usize> },
    Knn,
    External {
        endpoint: String,
        #[serde(with = "millis")]
        timeout: Duration,
        max_in_flight: usize,
    },
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl RegressorSpec {
    /// Builds a spec from a kind name and string parameters
    /// (`season`; `endpoint`, `timeout_ms`, `max_in_flight`).
    pub fn from_params(kind: &str, params: &BTreeMap<String, String>) -> Result<Self, RegressError> {
        let invalid = |msg: String| RegressError::InvalidSpec(msg);
        let parse_usize = |key: &str| -> Result<Option<usize>, RegressError> {
            params
                .get(key)
                .map(|v| v.parse::<usize>().map_err(|_| invalid(format!("{key}={v} is not an integer"))))
                .transpose()
        };
        if kind != "external" && params.contains_key("endpoint") {
            return Err(invalid(format!("endpoint given for non-external regressor `{kind}`")));
        }
        match kind {
            "seasonal_naive" | "snaive" => Ok(Self::SeasonalNaive { season: parse_usize("season")? }),
            "knn" => Ok(Self::Knn),
            "external" => {
                let endpoint = params
                    .get("endpoint")
                    .cloned()
                    .ok_or_else(|| invalid("external regressor needs an endpoint".into()))?;
                let timeout = parse_usize("timeout_ms")?
                    .map_or(DEFAULT_EXTERNAL_TIMEOUT, |ms| Duration::from_millis(ms as u64));
                let max_in_flight = parse_usize("max_in_flight")?.unwrap_or(4).max(1);
                Ok(Self::External { endpoint, timeout, max_in_flight })
            }
            other => Err(invalid(format!("unknown regressor `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::SeasonalNaive { .. } => "seasonal_naive",
            Self::Knn => "knn",
            Self::External { .. } => "external",
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Regressor>, RegressError> {
        Ok(match self {
            Self::SeasonalNaive { season } => Arc::new(SeasonalNaive { season: *season }),
            Self::Knn => Arc::new(KnnRegressor),
            Self::External { endpoint, timeout, max_in_flight } => {
                Arc::new(ExternalRegressor::new(endpoint, *timeout, *max_in_flight)?)
            }
        })
    }
}
