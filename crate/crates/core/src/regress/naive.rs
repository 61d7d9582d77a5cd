use crate::series::{TabularSplit, TimeSeries};

use super::{QuantileLevels, QuantilePrediction, RegressError, Regressor};

/// `ŷ[T+h] = y[T+h−m]`, stepping back whole seasons when the source lies in
/// the future or is missing. With fewer than `m` observations, or when no
/// observed value sits at that seasonal position, the last observed value is
/// repeated. Every level carries the point value.
///
/// Returns `None` when the context has no observed value at all.
pub fn seasonal_naive_forecast(
    context: &TimeSeries,
    horizon: usize,
    m: usize,
    levels: &QuantileLevels,
) -> Option<QuantilePrediction> {
    let points = seasonal_naive_points(&context.values, horizon, m)?;
    Some(QuantilePrediction::degenerate(levels.clone(), &points))
}

pub(crate) fn seasonal_naive_points(values: &[Option<f64>], horizon: usize, m: usize) -> Option<Vec<f64>> {
    let last = values.iter().rev().find_map(|v| *v)?;
    let n = values.len();
    let m = m.max(1);
    if n < m {
        return Some(vec![last; horizon]);
    }
    let points = (0..horizon)
        .map(|h| {
            // target index n + h; first candidate is one or more seasons back inside the history
            let mut src = n + h;
            while src >= n {
                src -= m;
            }
            loop {
                if let Some(v) = values[src] {
                    break v;
                }
                if src < m {
                    break last;
                }
                src -= m;
            }
        })
        .collect();
    Some(points)
}

/// Seasonal Naive as a backend. Inside the pipeline it forecasts from the raw
/// context; called on a tabular split it treats `y_train` as the history.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeasonalNaive {
    pub season: Option<usize>,
}

impl Regressor for SeasonalNaive {
    fn name(&self) -> &str {
        "seasonal_naive"
    }

    fn predict_quantiles(&self, split: &TabularSplit, levels: &QuantileLevels) -> Result<Vec<Vec<f64>>, RegressError> {
        let history: Vec<Option<f64>> = split.y_train.iter().copied().map(Some).collect();
        let points = seasonal_naive_points(&history, split.horizon(), self.season.unwrap_or(1))
            .ok_or(RegressError::TooFewRows { needed: 1, got: 0 })?;
        Ok(points.into_iter().map(|p| vec![p; levels.len()]).collect())
    }

    fn forecast_series(
        &self,
        context: &TimeSeries,
        horizon: usize,
        season: usize,
        levels: &QuantileLevels,
    ) -> Option<QuantilePrediction> {
        seasonal_naive_forecast(context, horizon, self.season.unwrap_or(season), levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn copies_last_season() {
        let y = obs(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(seasonal_naive_points(&y, 3, 3).unwrap(), vec![4.0, 5.0, 6.0]);
        assert_eq!(seasonal_naive_points(&y, 7, 3).unwrap(), vec![4.0, 5.0, 6.0, 4.0, 5.0, 6.0, 4.0]);
    }

    #[test]
    fn season_one_repeats_last() {
        let y = obs(&[1.0, 2.0, 9.0]);
        assert_eq!(seasonal_naive_points(&y, 4, 1).unwrap(), vec![9.0; 4]);
    }

    #[test]
    fn short_history_falls_back() {
        let y = obs(&[1.0, 2.0]);
        assert_eq!(seasonal_naive_points(&y, 3, 7).unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn missing_source_steps_back_a_season() {
        let y = vec![Some(1.0), Some(2.0), Some(3.0), None, Some(5.0), Some(6.0)];
        assert_eq!(seasonal_naive_points(&y, 3, 3).unwrap(), vec![1.0, 5.0, 6.0]);
        let y = vec![None, Some(2.0), Some(3.0), None, Some(5.0), Some(6.0)];
        assert_eq!(seasonal_naive_points(&y, 1, 3).unwrap(), vec![6.0]);
        assert_eq!(seasonal_naive_points(&[None, None], 1, 1), None);
    }

    #[test]
    fn periodic_series_zero_error() {
        let period = [3.0, -1.0, 4.0, 1.5, 9.0];
        let y: Vec<Option<f64>> = (0..23).map(|i| Some(period[i % 5])).collect();
        let f = seasonal_naive_points(&y, 40, 5).unwrap();
        for (h, v) in f.iter().enumerate() {
            assert_eq!(*v, period[(23 + h) % 5]);
        }
    }
}
