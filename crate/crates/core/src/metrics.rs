//! Forecast accuracy metrics and benchmark aggregation.
//!
//! `None` from [`mase`] or [`wql`] means the metric is not defined for the task
//! (vanishing denominator). Such tasks are left out of aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regress::{QuantileLevels, QuantilePrediction};

/// Floor applied to both sides of a relative score.
pub const RELATIVE_FLOOR: f64 = 1e-12;
const DENOMINATOR_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} truths vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("history of {len} points is too short for seasonality {m}")]
    HistoryTooShort { len: usize, m: usize },
    #[error("quantile level {0} is not in the prediction")]
    MissingLevel(f64),
    #[error("no records to aggregate")]
    EmptyRecordSet,
    #[error("non-finite metric in record for task `{0}`")]
    NonFinite(String),
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// In-sample mean of `|y[t] − y[t−m]|` over pairs where both ends are observed.
pub fn seasonal_error(history: &[Option<f64>], m: usize) -> Result<Option<f64>, MetricsError> {
    if m == 0 || history.len() <= m {
        return Err(MetricsError::HistoryTooShort { len: history.len(), m });
    }
    let diffs: Vec<f64> = history
        .iter()
        .skip(m)
        .zip(history)
        .filter_map(|(now, past)| Some((now.as_ref()? - past.as_ref()?).abs()))
        .collect();
    if diffs.is_empty() {
        return Ok(None);
    }
    let scale = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok((scale >= DENOMINATOR_EPS).then_some(scale))
}

/// Mean absolute error scaled by the seasonal-naive in-sample error of `history`.
pub fn mase(y_true: &[f64], y_point: &[f64], history: &[f64], m: usize) -> Result<Option<f64>, MetricsError> {
    let history: Vec<Option<f64>> = history.iter().copied().map(Some).collect();
    mase_with_gaps(y_true, y_point, &history, m)
}

/// [`mase`] for a history with missing observations.
pub fn mase_with_gaps(
    y_true: &[f64],
    y_point: &[f64],
    history: &[Option<f64>],
    m: usize,
) -> Result<Option<f64>, MetricsError> {
    check_lengths(y_true.len(), y_point.len())?;
    let Some(scale) = seasonal_error(history, m)? else {
        return Ok(None);
    };
    let mae = y_true.iter().zip(y_point).map(|(y, p)| (y - p).abs()).sum::<f64>() / y_true.len() as f64;
    Ok(Some(mae / scale))
}

/// Pinball loss `ρ_q(y, ŷ)`.
pub fn pinball(y: f64, y_hat: f64, q: f64) -> f64 {
    if y >= y_hat {
        q * (y - y_hat)
    } else {
        (1.0 - q) * (y_hat - y)
    }
}

/// `Σ_t Σ_q 2·ρ_q(y_t, ŷ_t^q) / (|levels| · Σ_t |y_t|)`.
pub fn wql(y_true: &[f64], pred: &QuantilePrediction, levels: &QuantileLevels) -> Result<Option<f64>, MetricsError> {
    check_lengths(y_true.len(), pred.horizon())?;
    let columns = levels
        .as_slice()
        .iter()
        .map(|&q| pred.levels.position(q).map(|j| (q, j)).ok_or(MetricsError::MissingLevel(q)))
        .collect::<Result<Vec<_>, _>>()?;
    let scale: f64 = y_true.iter().map(|y| y.abs()).sum();
    if scale < DENOMINATOR_EPS {
        return Ok(None);
    }
    let loss: f64 = y_true
        .iter()
        .zip(&pred.values)
        .map(|(&y, row)| columns.iter().map(|&(q, j)| 2.0 * pinball(y, row[j], q)).sum::<f64>())
        .sum();
    Ok(Some(loss / (columns.len() as f64 * scale)))
}

/// Symmetric MAPE as a fraction in `[0, 2]`; terms with `|y| + |ŷ| = 0` count as 0.
pub fn smape(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(y_true.len(), y_pred.len())?;
    let total: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| {
            let denom = y.abs() + p.abs();
            if denom == 0.0 {
                0.0
            } else {
                2.0 * (y - p).abs() / denom
            }
        })
        .sum();
    Ok(total / y_true.len() as f64)
}

/// `metric / baseline` with both floored at [`RELATIVE_FLOOR`].
pub fn relative_score(metric: f64, baseline: f64) -> f64 {
    metric.max(RELATIVE_FLOOR) / baseline.max(RELATIVE_FLOOR)
}

/// Scores of one model on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub task_id: String,
    pub model: String,
    pub mase: f64,
    pub wql: f64,
    pub rel_mase: f64,
    pub rel_wql: f64,
}

impl EvalRecord {
    /// Builds a record with relative scores against the baseline's metrics on the same task.
    pub fn relative_to(task_id: &str, model: &str, mase: f64, wql: f64, baseline_mase: f64, baseline_wql: f64) -> Self {
        Self {
            task_id: task_id.to_string(),
            model: model.to_string(),
            mase,
            wql,
            rel_mase: relative_score(mase, baseline_mase),
            rel_wql: relative_score(wql, baseline_wql),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub n_tasks: usize,
    pub geo_mean_rel_mase: f64,
    pub geo_mean_rel_wql: f64,
    pub mean_rank_wql: f64,
    pub mean_rank_mase: f64,
}

/// `exp(mean(ln x))`.
pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

/// 1-based ranks, ties share the average of the ranks they span.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| {
            let below = scores.iter().filter(|&&o| o < s).count();
            let equal = scores.iter().filter(|&&o| o == s).count();
            below as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect()
}

/// Per-model geometric means of the relative scores and mean per-task ranks.
/// Models are reported in order of first appearance.
pub fn aggregate(records: &[EvalRecord]) -> Result<Vec<ModelSummary>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecordSet);
    }
    if let Some(r) = records
        .iter()
        .find(|r| ![r.mase, r.wql, r.rel_mase, r.rel_wql].iter().all(|v| v.is_finite()))
    {
        return Err(MetricsError::NonFinite(r.task_id.clone()));
    }
    let mut models: Vec<&str> = Vec::new();
    let mut tasks: Vec<&str> = Vec::new();
    for r in records {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        if !tasks.contains(&r.task_id.as_str()) {
            tasks.push(&r.task_id);
        }
    }
    let mut rank_wql = vec![Vec::new(); models.len()];
    let mut rank_mase = vec![Vec::new(); models.len()];
    for task in &tasks {
        let rows: Vec<&EvalRecord> = records.iter().filter(|r| r.task_id == *task).collect();
        let wql: Vec<f64> = rows.iter().map(|r| r.wql).collect();
        let mase: Vec<f64> = rows.iter().map(|r| r.mase).collect();
        for ((r, rw), rm) in rows.iter().zip(average_ranks(&wql)).zip(average_ranks(&mase)) {
            let i = models.iter().position(|m| *m == r.model).expect("model collected above");
            rank_wql[i].push(rw);
            rank_mase[i].push(rm);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(models
        .iter()
        .enumerate()
        .map(|(i, model)| {
            let own: Vec<&EvalRecord> = records.iter().filter(|r| r.model == *model).collect();
            let rel_mase: Vec<f64> = own.iter().map(|r| r.rel_mase).collect();
            let rel_wql: Vec<f64> = own.iter().map(|r| r.rel_wql).collect();
            ModelSummary {
                model: model.to_string(),
                n_tasks: own.len(),
                geo_mean_rel_mase: geometric_mean(&rel_mase).unwrap_or(f64::NAN),
                geo_mean_rel_wql: geometric_mean(&rel_wql).unwrap_or(f64::NAN),
                mean_rank_wql: mean(&rank_wql[i]),
                mean_rank_mase: mean(&rank_mase[i]),
            }
        })
        .collect())
}
