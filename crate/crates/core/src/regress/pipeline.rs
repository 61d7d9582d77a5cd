use crate::featurize::{assemble_features, FeatureConfig};
use crate::seasonal::{detect_seasonalities, SeasonalitySet};
use crate::series::{drop_missing_rows, split_context_horizon, ForecastTask, TabularSplit};

use super::transform::{power_transform, z_normalize, TargetTransform, CONSTANT_STD};
use super::{ensemble_quantiles, fit_predict, QuantileLevels, QuantilePrediction, RegressError, Regressor};

/// Forecast plus bookkeeping for run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub prediction: QuantilePrediction,
    pub context_len: usize,
    pub seasonalities: Option<SeasonalitySet>,
    /// Rows whose backend quantiles crossed and were sorted.
    pub repaired_rows: usize,
    /// Training targets were constant and the backend was not called.
    pub constant_target: bool,
}

fn fit_branch(
    regressor: &dyn Regressor,
    split: &TabularSplit,
    levels: &QuantileLevels,
    (targets, transform): (Vec<f64>, TargetTransform),
) -> Result<(QuantilePrediction, usize), RegressError> {
    let branch = TabularSplit { y_train: targets, ..split.clone() };
    let fitted = fit_predict(regressor, &branch, levels)?;
    // quantiles commute with the monotone inverse transform
    let restored = fitted.prediction.map_values(|z| transform.inverse(z));
    Ok((restored, fitted.repaired_rows))
}

/// Truncate the context, detect seasonalities on it, featurize, drop rows with
/// missing targets, fit on z-normalized and on power-transformed targets, map
/// both back to the data scale and average them level-wise.
///
/// Backends that forecast from the raw series (Seasonal Naive) skip
/// everything after truncation. A constant training target is returned at
/// every level without calling the backend.
pub fn run_pipeline(
    task: &ForecastTask,
    features: &FeatureConfig,
    regressor: &dyn Regressor,
    levels: &QuantileLevels,
) -> Result<PipelineOutput, RegressError> {
    let (context, future) = split_context_horizon(task)?;
    let context_len = context.len();
    let output = |prediction, seasonalities, repaired_rows, constant_target| PipelineOutput {
        prediction,
        context_len,
        seasonalities,
        repaired_rows,
        constant_target,
    };

    if let Some(prediction) = regressor.forecast_series(&context, task.horizon, task.seasonality_m, levels) {
        return Ok(output(prediction, None, 0, false));
    }

    let observed: Vec<f64> = context.observed().collect();
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let spread = (observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / observed.len() as f64).sqrt();
    if spread < CONSTANT_STD {
        let prediction = QuantilePrediction::degenerate(levels.clone(), &vec![observed[0]; task.horizon]);
        return Ok(output(prediction, None, 0, true));
    }

    let seasonalities = features.use_seasonal.then(|| detect_seasonalities(&context.values, features.k_seasonal));
    let feature_split = assemble_features(&context, &future, seasonalities.as_ref(), features)?;
    let split = drop_missing_rows(feature_split, &context.values)?;

    let (znorm, repaired_a) = fit_branch(regressor, &split, levels, z_normalize(&split.y_train))?;
    let (power, repaired_b) = fit_branch(regressor, &split, levels, power_transform(&split.y_train))?;
    let prediction = ensemble_quantiles(&znorm, &power)?;
    Ok(output(prediction, seasonalities, repaired_a + repaired_b, false))
}
