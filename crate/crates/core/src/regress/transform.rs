//! Target transforms applied before regression and inverted on the predicted quantiles.

use serde::{Deserialize, Serialize};

/// Below this population standard deviation a target vector counts as constant.
pub const CONSTANT_STD: f64 = 1e-12;

/// Box–Cox exponents searched by profile likelihood: −2.0, −1.9, …, 2.0.
pub const BOX_COX_LAMBDAS: [f64; 41] = {
    let mut out = [0.0; 41];
    let mut i = 0;
    while i < 41 {
        out[i] = (i as f64 - 20.0) / 10.0;
        i += 1;
    }
    out
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Znorm,
    Power,
}

/// Invertible map from raw targets to standardized regression targets.
///
/// `Power` applies `y ↦ BoxCox(y + shift; lambda)` and then standardizes with
/// `mean`/`std`; `Znorm` only standardizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTransform {
    pub kind: TransformKind,
    pub mean: f64,
    pub std: f64,
    pub lambda: f64,
    pub shift: f64,
    /// The standardized input was constant; `std` was forced to 1.
    pub constant: bool,
}

fn mean_std(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn box_cox(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x.ln()
    } else {
        (lambda * x.ln()).exp_m1() / lambda
    }
}

fn inv_box_cox(t: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return t.exp();
    }
    // values outside the transform's range (only reachable through
    // extrapolating backends) are clamped to the boundary
    let base = (lambda * t).max(-1.0 + f64::EPSILON);
    (base.ln_1p() / lambda).exp()
}

impl TargetTransform {
    pub fn forward(&self, y: f64) -> f64 {
        let v = match self.kind {
            TransformKind::Znorm => y,
            TransformKind::Power => box_cox(y + self.shift, self.lambda),
        };
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        let v = z * self.std + self.mean;
        match self.kind {
            TransformKind::Znorm => v,
            TransformKind::Power => inv_box_cox(v, self.lambda) - self.shift,
        }
    }
}

fn standardize(kind: TransformKind, values: &[f64], lambda: f64, shift: f64) -> (Vec<f64>, TargetTransform) {
    let (mean, std) = mean_std(values);
    let constant = std.is_nan() || std < CONSTANT_STD;
    let std = if constant { 1.0 } else { std };
    let transform = TargetTransform { kind, mean, std, lambda, shift, constant };
    (values.iter().map(|v| (v - mean) / std).collect(), transform)
}

/// `(y − mean)/std` with population std; a constant input gets `std = 1` and the constant flag.
pub fn z_normalize(y: &[f64]) -> (Vec<f64>, TargetTransform) {
    assert!(!y.is_empty(), "z_normalize needs at least one value");
    standardize(TransformKind::Znorm, y, 1.0, 0.0)
}

/// Box–Cox profile log-likelihood, up to an additive constant.
pub(crate) fn box_cox_log_likelihood(x: &[f64], lambda: f64) -> f64 {
    let transformed: Vec<f64> = x.iter().map(|&v| box_cox(v, lambda)).collect();
    let (_, std) = mean_std(&transformed);
    let n = x.len() as f64;
    let log_sum: f64 = x.iter().map(|v| v.ln()).sum();
    -n * std.ln() + (lambda - 1.0) * log_sum
}

/// Box–Cox with the exponent chosen on [`BOX_COX_LAMBDAS`] by maximum
/// profile likelihood, followed by standardization.
///
/// Inputs with a non-positive minimum are first shifted by `1 − min` so the
/// smallest shifted value is exactly 1.
pub fn power_transform(y: &[f64]) -> (Vec<f64>, TargetTransform) {
    assert!(y.len() >= 2, "power_transform needs at least two values");
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { 1.0 - min } else { 0.0 };
    let x: Vec<f64> = y.iter().map(|v| v + shift).collect();

    let mut best = (1.0, f64::NEG_INFINITY);
    for lambda in BOX_COX_LAMBDAS {
        let ll = box_cox_log_likelihood(&x, lambda);
        if ll.is_finite() && ll > best.1 {
            best = (lambda, ll);
        }
    }
    let lambda = best.0;
    let transformed: Vec<f64> = x.iter().map(|&v| box_cox(v, lambda)).collect();
    standardize(TransformKind::Power, &transformed, lambda, shift)
}
