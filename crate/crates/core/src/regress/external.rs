//! HTTP adapter for an out-of-process regressor.
//!
//! `POST {endpoint}/v1/fit_predict` with
//! `{"x_train": [[..]], "y_train": [..], "x_test": [[..]], "quantile_levels": [..]}`
//! and expects `200` with `{"quantiles": [[..]]}` shaped `H × |levels|`.
//! Anything else is a [`RegressError::BackendFailure`].

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::series::TabularSplit;

use super::{QuantileLevels, RegressError, Regressor};

pub const FIT_PREDICT_PATH: &str = "/v1/fit_predict";

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FitPredictRequest {
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<f64>,
    pub x_test: Vec<Vec<f64>>,
    pub quantile_levels: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FitPredictResponse {
    pub quantiles: Vec<Vec<f64>>,
}

/// Serialized request body. Fails on any non-finite number.
pub fn encode_request(split: &TabularSplit, levels: &QuantileLevels) -> Result<String, RegressError> {
    let request = FitPredictRequest {
        x_train: split.x_train.to_nested(),
        y_train: split.y_train.clone(),
        x_test: split.x_test.to_nested(),
        quantile_levels: levels.as_slice().to_vec(),
    };
    let finite = request.x_train.iter().chain(&request.x_test).flatten().chain(&request.y_train).all(|v| v.is_finite());
    if !finite {
        return Err(RegressError::BackendFailure("request contains NaN or infinite values".into()));
    }
    serde_json::to_string(&request).map_err(|e| RegressError::BackendFailure(format!("encoding request: {e}")))
}

/// Decodes and shape-checks a response body.
pub fn decode_response(body: &[u8], horizon: usize, n_levels: usize) -> Result<Vec<Vec<f64>>, RegressError> {
    let response: FitPredictResponse = serde_json::from_slice(body)
        .map_err(|e| RegressError::BackendFailure(format!("malformed response: {e}")))?;
    if response.quantiles.len() != horizon || response.quantiles.iter().any(|r| r.len() != n_levels) {
        return Err(RegressError::BackendFailure(format!(
            "response shape does not match {horizon}×{n_levels}"
        )));
    }
    if response.quantiles.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RegressError::BackendFailure("response contains non-finite values".into()));
    }
    Ok(response.quantiles)
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(n: usize) -> Self {
        Self { available: Mutex::new(n.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

pub struct ExternalRegressor {
    url: String,
    client: reqwest::blocking::Client,
    in_flight: InFlight,
}

impl std::fmt::Debug for ExternalRegressor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalRegressor").field("url", &self.url).finish_non_exhaustive()
    }
}

impl ExternalRegressor {
    /// `endpoint` is the server base URL; the protocol path is appended unless already present.
    pub fn new(endpoint: &str, timeout: Duration, max_in_flight: usize) -> Result<Self, RegressError> {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with(FIT_PREDICT_PATH) { base.to_string() } else { format!("{base}{FIT_PREDICT_PATH}") };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| RegressError::BackendFailure(format!("building HTTP client: {e}")))?;
        Ok(Self { url, client, in_flight: InFlight::new(max_in_flight) })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Regressor for ExternalRegressor {
    fn name(&self) -> &str {
        "external"
    }

    fn predict_quantiles(&self, split: &TabularSplit, levels: &QuantileLevels) -> Result<Vec<Vec<f64>>, RegressError> {
        let body = encode_request(split, levels)?;
        let _permit = self.in_flight.acquire();
        let response = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .map_err(|e| RegressError::BackendFailure(format!("request to {}: {e}", self.url)))?;
        let status = response.status();
        if status != reqwest::StatusCode::OK {
            return Err(RegressError::BackendFailure(format!("{} answered {status}", self.url)));
        }
        let bytes = response
            .bytes()
            .map_err(|e| RegressError::BackendFailure(format!("reading response from {}: {e}", self.url)))?;
        decode_response(&bytes, split.horizon(), levels.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureMatrix;

    fn split() -> TabularSplit {
        let names = vec!["a".to_string(), "b".to_string()];
        TabularSplit::new(
            FeatureMatrix::from_rows(names.clone(), vec![vec![0.0, 1.0], vec![1.0, 0.5]]).unwrap(),
            vec![1.0, 2.0],
            FeatureMatrix::from_rows(names, vec![vec![2.0, 0.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn request_layout() {
        let levels = QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap();
        assert_eq!(
            encode_request(&split(), &levels).unwrap(),
            r#"{"x_train":[[0.0,1.0],[1.0,0.5]],"y_train":[1.0,2.0],"x_test":[[2.0,0.0]],"quantile_levels":[0.1,0.5,0.9]}"#
        );
    }

    #[test]
    fn response_validation() {
        assert_eq!(decode_response(br#"{"quantiles":[[1,2,3]]}"#, 1, 3).unwrap(), vec![vec![1.0, 2.0, 3.0]]);
        assert!(decode_response(br#"{"quantiles":[[1,2]]}"#, 1, 3).is_err());
        assert!(decode_response(br#"{"quantiles":[[1,2,3]]}"#, 2, 3).is_err());
        assert!(decode_response(br#"{"q":[]}"#, 0, 3).is_err());
        assert!(decode_response(b"not json", 1, 3).is_err());
        assert!(decode_response(br#"{"quantiles":[[1,NaN,3]]}"#, 1, 3).is_err());
    }

    #[test]
    fn url_building() {
        let r = ExternalRegressor::new("http://127.0.0.1:9/", Duration::from_secs(1), 2).unwrap();
        assert_eq!(r.url(), "http://127.0.0.1:9/v1/fit_predict");
        let r = ExternalRegressor::new("http://h/v1/fit_predict", Duration::from_secs(1), 2).unwrap();
        assert_eq!(r.url(), "http://h/v1/fit_predict");
    }

    #[test]
    fn unreachable_endpoint_fails() {
        let r = ExternalRegressor::new("http://127.0.0.1:9", Duration::from_millis(500), 1).unwrap();
        let levels = QuantileLevels::evaluation_grid();
        assert!(matches!(r.predict_quantiles(&split(), &levels), Err(RegressError::BackendFailure(_))));
    }
}
