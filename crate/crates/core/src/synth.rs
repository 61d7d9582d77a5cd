//! Seeded synthetic signals: noise, trends, seasonal patterns and their
//! combinations, composite sinusoids, and `sin(n·x)` harmonics.
//!
//! The generator is xorshift64* seeded through splitmix64 and all
//! transcendental functions come from `libm`, so a `(spec, seed)` pair produces
//! the same bits on every platform.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{Frequency, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// splitmix64 step, used for seeding and for deriving sub-seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for stream `stream` of a generator seeded with `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// xorshift64* (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let state = splitmix64(seed);
        Self { state: if state == 0 { 0x9E37_79B9_7F4A_7C15 } else { state } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Integer uniform in `[lo, hi]`.
    pub fn int_in(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_u64() % (hi - lo + 1)
    }

    /// Box–Muller pair of standard normals.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        (r * libm::cos(TAU * u2), r * libm::sin(TAU * u2))
    }
}

/// `n` i.i.d. draws from `N(mean, std²)`.
pub fn gen_noise(mean: f64, std: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = XorShift64Star::new(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let (a, b) = rng.normal_pair();
        out.push(mean + std * a);
        out.push(mean + std * b);
    }
    out.truncate(n);
    out
}

/// `A·sin(2π·freq·t/n + phase)`, with `freq` in cycles per generated window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub signal: Vec<f64>,
    pub components: Vec<Sinusoid>,
}

impl Composite {
    /// True frequencies in cycles per step.
    pub fn freqs_per_step(&self) -> Vec<f64> {
        let n = self.signal.len() as f64;
        self.components.iter().map(|c| c.freq / n).collect()
    }
}

pub fn composite_signal(components: &[Sinusoid], n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..n)
        .map(|t| {
            components
                .iter()
                .map(|c| c.amplitude * libm::sin(TAU * c.freq * t as f64 / nf + c.phase))
                .sum()
        })
        .collect()
}

pub const COMPOSITE_FREQ_RANGE: (f64, f64) = (1.0, 24.0);
pub const COMPOSITE_AMPLITUDE_RANGE: (f64, f64) = (0.5, 2.0);

/// Sum of `n_components` sinusoids with frequency, amplitude and phase drawn
/// uniformly from `[1, 24]` cycles per window, `[0.5, 2]` and `[0, 2π]`.
pub fn gen_composite(n_components: usize, n: usize, seed: u64) -> Result<Composite, SynthError> {
    if !(3..=10).contains(&n_components) {
        return Err(SynthError::InvalidParam(format!("n_components={n_components} outside [3, 10]")));
    }
    if n < 64 {
        return Err(SynthError::InvalidParam(format!("n={n} below 64")));
    }
    let mut rng = XorShift64Star::new(seed);
    let components: Vec<Sinusoid> = (0..n_components)
        .map(|_| Sinusoid {
            freq: rng.uniform(COMPOSITE_FREQ_RANGE.0, COMPOSITE_FREQ_RANGE.1),
            amplitude: rng.uniform(COMPOSITE_AMPLITUDE_RANGE.0, COMPOSITE_AMPLITUDE_RANGE.1),
            phase: rng.uniform(0.0, TAU),
        })
        .collect();
    Ok(Composite { signal: composite_signal(&components, n), components })
}

/// Composite with a seeded component count in `[3, 10]`.
pub fn gen_random_composite(n: usize, seed: u64) -> Result<Composite, SynthError> {
    let count = XorShift64Star::new(sub_seed(seed, 7)).int_in(3, 10) as usize;
    gen_composite(count, n, seed)
}

/// Sampling grid for harmonic signals: `x_t = phase + 2π·t / samples_per_cycle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicGrid {
    pub samples_per_cycle: usize,
    pub phase: f64,
}

impl Default for HarmonicGrid {
    fn default() -> Self {
        Self { samples_per_cycle: 100, phase: 0.0 }
    }
}

impl HarmonicGrid {
    pub fn x(&self, t: usize) -> f64 {
        self.phase + TAU * t as f64 / self.samples_per_cycle as f64
    }
}

/// `sin(multiplier · x_t)` for `t = 0..n`.
pub fn gen_harmonic(multiplier: u32, n: usize, grid: HarmonicGrid) -> Vec<f64> {
    let k = f64::from(multiplier);
    (0..n).map(|t| libm::sin(k * grid.x(t))).collect()
}

/// Base features `(sin(x_t), cos(x_t))` for the harmonic experiments.
pub fn harmonic_base_features(n: usize, grid: HarmonicGrid) -> (Vec<f64>, Vec<f64>) {
    (0..n).map(|t| (libm::sin(grid.x(t)), libm::cos(grid.x(t)))).unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Noise,
    LinearTrend,
    ExpTrend,
    Seasonal,
    AdditiveCombo,
    MultiplicativeCombo,
    Composite,
    Harmonic,
}

impl std::str::FromStr for SynthKind {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| SynthError::InvalidParam(format!("unknown synth kind `{s}`")))
    }
}

/// One synthetic series. Unset parameters take per-kind defaults:
///
/// | kind | parameters |
/// |---|---|
/// | noise | `mean`=0, `std`=1 |
/// | linear_trend | `a`=1, `b`=0 (`a·t + b`) |
/// | exp_trend | `a`=1, `b`=0.005 (`a·e^{b·t}`) |
/// | seasonal | `amplitude`=1, `period`=24, `phase`=0, `amplitude2`=0, `period2`=168 |
/// | additive_combo | trend `a`=0.01, `b`=0 + seasonal + noise `noise_std`=0.1 |
/// | multiplicative_combo | trend `a`=0.01, `b`=1 times `1 + seasonal` (`amplitude`=0.3) |
/// | composite | `components`=5 |
/// | harmonic | `multiplier`=1, `samples_per_cycle`=100, `phase`=0 |
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub length: usize,
    pub start: NaiveDateTime,
    pub freq: Frequency,
}

/// Default qualitative setup: 1000 points, the first 800 as context.
pub const QUALITATIVE_LENGTH: usize = 1000;
pub const QUALITATIVE_CONTEXT: usize = 800;

impl SynthSpec {
    pub fn new(kind: SynthKind, length: usize, seed: u64) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
            seed,
            length,
            start: NaiveDate::from_ymd_opt(2020, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date"),
            freq: Frequency::hourly(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn trend(&self, a: f64, b: f64) -> Vec<f64> {
        let (a, b) = (self.param("a", a), self.param("b", b));
        (0..self.length).map(|t| a * t as f64 + b).collect()
    }

    fn seasonal(&self, amplitude: f64) -> Vec<f64> {
        let amp = self.param("amplitude", amplitude);
        let period = self.param("period", 24.0);
        let phase = self.param("phase", 0.0);
        let amp2 = self.param("amplitude2", 0.0);
        let period2 = self.param("period2", 168.0);
        (0..self.length)
            .map(|t| {
                let t = t as f64;
                amp * libm::sin(TAU * t / period + phase) + amp2 * libm::sin(TAU * t / period2)
            })
            .collect()
    }

    fn noise(&self, std: f64) -> Vec<f64> {
        gen_noise(self.param("noise_mean", 0.0), self.param("noise_std", std), self.length, sub_seed(self.seed, 1))
    }

    /// Separately generated parts of an additive combo: trend, seasonal, noise.
    pub fn additive_parts(&self) -> [Vec<f64>; 3] {
        [self.trend(0.01, 0.0), self.seasonal(1.0), self.noise(0.1)]
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.length == 0 {
            return Err(SynthError::InvalidParam("length must be positive".into()));
        }
        if let Some((k, v)) = self.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(SynthError::InvalidParam(format!("{k}={v}")));
        }
        for key in ["period", "period2", "samples_per_cycle"] {
            if self.params.get(key).is_some_and(|&p| p <= 0.0) {
                return Err(SynthError::InvalidParam(format!("{key} must be positive")));
            }
        }
        if self.param("std", 1.0) < 0.0 || self.param("noise_std", 0.0) < 0.0 {
            return Err(SynthError::InvalidParam("standard deviation must be non-negative".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Result<Vec<f64>, SynthError> {
        self.validate()?;
        let n = self.length;
        Ok(match self.kind {
            SynthKind::Noise => gen_noise(self.param("mean", 0.0), self.param("std", 1.0), n, self.seed),
            SynthKind::LinearTrend => self.trend(1.0, 0.0),
            SynthKind::ExpTrend => {
                let (a, b) = (self.param("a", 1.0), self.param("b", 0.005));
                (0..n).map(|t| a * libm::exp(b * t as f64)).collect()
            }
            SynthKind::Seasonal => self.seasonal(1.0),
            SynthKind::AdditiveCombo => {
                let [trend, seasonal, noise] = self.additive_parts();
                (0..n).map(|t| trend[t] + seasonal[t] + noise[t]).collect()
            }
            SynthKind::MultiplicativeCombo => {
                let trend = self.trend(0.01, 1.0);
                let seasonal = self.seasonal(0.3);
                trend.iter().zip(&seasonal).map(|(tr, s)| tr * (1.0 + s)).collect()
            }
            SynthKind::Composite => {
                let count = self.param("components", 5.0) as usize;
                gen_composite(count, n, self.seed)?.signal
            }
            SynthKind::Harmonic => {
                let grid = HarmonicGrid {
                    samples_per_cycle: self.param("samples_per_cycle", 100.0) as usize,
                    phase: self.param("phase", 0.0),
                };
                gen_harmonic(self.param("multiplier", 1.0) as u32, n, grid)
            }
        })
    }

    pub fn series_id(&self) -> String {
        let kind = serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        format!("{kind}-{}", self.seed)
    }
}

pub fn gen_pattern(spec: &SynthSpec) -> Result<TimeSeries, SynthError> {
    let values = spec.values()?;
    Ok(TimeSeries::from_values(spec.series_id(), spec.start, spec.freq, &values))
}
