//! Forecasting univariate time series with tabular regressors.
//!
//! A series is turned into a regression table (calendar features, automatically
//! detected seasonal features and a running index), a probabilistic regressor
//! predicts a quantile curve for each future step, and the result is scored
//! with MASE and WQL against a Seasonal Naive baseline.
//!
//! ```
//! use chrono::NaiveDate;
//! use tsfm_core::featurize::FeatureConfig;
//! use tsfm_core::regress::{run_pipeline, KnnRegressor, QuantileLevels};
//! use tsfm_core::series::{ForecastTask, Frequency, TimeSeries};
//!
//! let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
//! let values: Vec<f64> = (0..240).map(|t| ((t % 24) as f64).sin()).collect();
//! let series = TimeSeries::from_values("demo", start, Frequency::hourly(), &values);
//! let task = ForecastTask::new(series, 24).unwrap();
//! let out = run_pipeline(&task, &FeatureConfig::default(), &KnnRegressor, &QuantileLevels::default()).unwrap();
//! assert_eq!(out.prediction.horizon(), 24);
//! ```

pub mod featurize;
pub mod fft;
pub mod metrics;
pub mod regress;
pub mod seasonal;
pub mod series;
pub mod synth;
