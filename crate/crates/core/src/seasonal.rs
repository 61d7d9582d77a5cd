//! Automatic top-k seasonality extraction.
//!
//! Pipeline: linear interpolation of gaps, least-squares linear detrend, Hann
//! taper, zero-padding by two and then up to the next power of two, magnitude
//! spectrum, and selection of the largest local maxima. Frequencies are in
//! cycles per step; the resolution is `1 / padded_len`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::FeatureMatrix;
use crate::fft::dft_real;

/// Below this many observed values detection returns an empty set.
pub const MIN_DETECTION_POINTS: usize = 8;
pub const PAD_FACTOR: usize = 2;
/// Two selected peaks must be more than this many padded bins apart.
pub const MIN_PEAK_SEPARATION_BINS: usize = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeasonalError {
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
}

/// Detected frequencies (cycles per step), strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalitySet {
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub k_requested: usize,
}

impl SeasonalitySet {
    pub fn new(freqs: Vec<f64>, magnitudes: Vec<f64>, k_requested: usize) -> Self {
        debug_assert_eq!(freqs.len(), magnitudes.len());
        Self { freqs, magnitudes, k_requested }
    }

    pub fn empty(k_requested: usize) -> Self {
        Self::new(Vec::new(), Vec::new(), k_requested)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Periods in steps, `1/f`.
    pub fn periods(&self) -> Vec<f64> {
        self.freqs.iter().map(|f| 1.0 / f).collect()
    }
}

/// Least-squares line `slope·t + intercept` over `t = 0..n` and the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Detrended {
    pub residual: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

pub fn detrend_linear(y: &[f64]) -> Result<Detrended, SeasonalError> {
    let n = y.len();
    if n < 2 {
        return Err(SeasonalError::TooShort { needed: 2, got: n });
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &v) in y.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let residual = y
        .iter()
        .enumerate()
        .map(|(t, &v)| v - (slope * t as f64 + intercept))
        .collect();
    Ok(Detrended { residual, slope, intercept })
}

/// Symmetric Hann window, `0.5·(1 − cos(2πj/(n−1)))`; `[1]` for `n = 1`.
pub fn hann_window(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let denom = (n - 1) as f64;
            (0..n).map(|j| 0.5 * (1.0 - (TAU * j as f64 / denom).cos())).collect()
        }
    }
}

/// Appends zeros so the output is `factor` times as long.
pub fn zero_pad(y: &[f64], factor: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len() * factor);
    out.extend_from_slice(y);
    out.resize(y.len() * factor, 0.0);
    out
}

/// One-sided magnitude spectrum, bins `j = 0..=N/2` at `j/N` cycles per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub mags: Vec<f64>,
}

pub fn real_dft_magnitude(y: &[f64]) -> Spectrum {
    let n = y.len();
    let spectrum = dft_real(y);
    let bins = n / 2 + 1;
    Spectrum {
        freqs: (0..bins).map(|j| j as f64 / n as f64).collect(),
        mags: spectrum.iter().take(bins).map(|c| c.norm()).collect(),
    }
}

/// Fills gaps by linear interpolation between observed neighbours; leading and
/// trailing gaps take the nearest observed value.
pub fn interpolate_missing(y: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<(usize, f64)> =
        y.iter().enumerate().filter_map(|(i, v)| v.map(|x| (i, x))).collect();
    let (&(first_i, first_v), &(last_i, last_v)) = (known.first()?, known.last()?);
    let mut out = vec![0.0; y.len()];
    out[..=first_i].fill(first_v);
    out[last_i..].fill(last_v);
    for pair in known.windows(2) {
        let ((i0, v0), (i1, v1)) = (pair[0], pair[1]);
        for (i, slot) in out.iter_mut().enumerate().take(i1 + 1).skip(i0) {
            let w = (i - i0) as f64 / (i1 - i0) as f64;
            *slot = v0 + w * (v1 - v0);
        }
    }
    Some(out)
}

/// Indices of strict local maxima (`m[j] > m[j−1]` and `m[j] ≥ m[j+1]`), DC excluded.
fn local_peaks(mags: &[f64]) -> Vec<usize> {
    (1..mags.len())
        .filter(|&j| mags[j] > mags[j - 1] && mags.get(j + 1).is_none_or(|&r| mags[j] >= r))
        .collect()
}

/// Up to `k` dominant frequencies of the series.
pub fn detect_seasonalities(y: &[Option<f64>], k: usize) -> SeasonalitySet {
    let observed = y.iter().filter(|v| v.is_some()).count();
    if observed < MIN_DETECTION_POINTS || k == 0 {
        return SeasonalitySet::empty(k);
    }
    let Some(filled) = interpolate_missing(y) else {
        return SeasonalitySet::empty(k);
    };
    let Ok(detrended) = detrend_linear(&filled) else {
        return SeasonalitySet::empty(k);
    };
    let window = hann_window(filled.len());
    let tapered: Vec<f64> = detrended.residual.iter().zip(&window).map(|(r, w)| r * w).collect();
    let mut padded = zero_pad(&tapered, PAD_FACTOR);
    padded.resize(padded.len().next_power_of_two(), 0.0);
    let spectrum = real_dft_magnitude(&padded);

    let mut peaks = local_peaks(&spectrum.mags);
    // descending magnitude, ties toward the lower frequency
    peaks.sort_by(|&a, &b| spectrum.mags[b].total_cmp(&spectrum.mags[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in peaks {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(j) > MIN_PEAK_SEPARATION_BINS) {
            chosen.push(j);
        }
    }
    SeasonalitySet::new(
        chosen.iter().map(|&j| spectrum.freqs[j]).collect(),
        chosen.iter().map(|&j| spectrum.mags[j]).collect(),
        k,
    )
}

/// `2·k_requested` columns of `(cos(2πf·t), sin(2πf·t))` pairs; pairs beyond
/// the detected frequencies are zero.
pub fn seasonal_features(set: &SeasonalitySet, indices: &[f64], k_requested: usize) -> FeatureMatrix {
    let names: Vec<String> = (0..k_requested)
        .flat_map(|i| [format!("seasonal_{i}_cos"), format!("seasonal_{i}_sin")])
        .collect();
    let rows = indices
        .iter()
        .map(|&t| {
            let mut row = vec![0.0; 2 * k_requested];
            for (i, f) in set.freqs.iter().take(k_requested).enumerate() {
                let (s, c) = (2.0 * PI * f * t).sin_cos();
                row[2 * i] = c;
                row[2 * i + 1] = s;
            }
            row
        })
        .collect();
    FeatureMatrix::from_rows(names, rows).expect("rows built with the declared width")
}
