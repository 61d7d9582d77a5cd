//! Dataset files and manifests.
//!
//! Two on-disk layouts are read:
//!
//! * JSONL, one series per line:
//!   `{"id": "a", "start": "2020-01-01 00:00:00", "freq": "H", "target": [1.0, null, 3.0]}`
//! * CSV in long format with the header `item_id,timestamp,target`. The grid
//!   of each item is inferred from its first two timestamps and every later
//!   row must sit on it. An empty target cell is a missing value.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tsfm_core::series::{validate_grid, Frequency, FrequencyUnit, TimeSeries};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("series `{series}` is off its grid: {message}")]
    GridViolation { series: String, message: String },
    #[error("invalid manifest `{name}`: {message}")]
    Manifest { name: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Short,
    Medium,
    Long,
}

impl Term {
    pub fn factor(self) -> usize {
        match self {
            Self::Short => 1,
            Self::Medium => 10,
            Self::Long => 15,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Short => "short",
            Self::Medium => "medium",
            Self::Long => "long",
        })
    }
}

impl FromStr for Term {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" => Ok(Self::Short),
            "medium" => Ok(Self::Medium),
            "long" => Ok(Self::Long),
            other => Err(format!("unknown term `{other}`")),
        }
    }
}

/// Short-term horizon of the benchmark convention for a frequency unit.
pub fn short_horizon(unit: FrequencyUnit) -> usize {
    match unit {
        FrequencyUnit::Second => 60,
        FrequencyUnit::Minute => 48,
        FrequencyUnit::Hour => 48,
        FrequencyUnit::Day => 30,
        FrequencyUnit::Week => 8,
        FrequencyUnit::Month => 12,
        FrequencyUnit::Quarter => 8,
        FrequencyUnit::Year => 6,
    }
}

/// Horizon for a frequency and term: the short horizon times 1, 10 or 15.
pub fn term_horizon(freq: Frequency, term: Term) -> usize {
    short_horizon(freq.unit()) * term.factor()
}

/// One benchmark dataset: a file, its frequency and the forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DatasetFormat>,
    pub freq: Frequency,
    pub horizon: usize,
    pub term: Term,
}

impl DatasetManifest {
    /// Manifest whose horizon follows the term convention.
    pub fn new(name: impl Into<String>, path: impl Into<PathBuf>, freq: Frequency, term: Term) -> Self {
        Self { name: name.into(), path: path.into(), format: None, freq, horizon: term_horizon(freq, term), term }
    }

    pub fn resolved_format(&self) -> Result<DatasetFormat, DatasetError> {
        self.format
            .or_else(|| DatasetFormat::from_path(&self.path))
            .ok_or_else(|| self.invalid(format!("cannot tell the format of {}", self.path.display())))
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let expected = term_horizon(self.freq, self.term);
        if self.horizon != expected {
            return Err(self.invalid(format!(
                "horizon {} does not match the {} term for {} (expected {expected})",
                self.horizon, self.term, self.freq
            )));
        }
        if !self.path.is_file() {
            return Err(self.invalid(format!("{} does not exist", self.path.display())));
        }
        self.resolved_format().map(|_| ())
    }

    /// Validates the manifest, loads the file and checks that every series is on
    /// the manifest's frequency.
    pub fn load(&self) -> Result<Vec<TimeSeries>, DatasetError> {
        self.validate()?;
        let series = load_dataset_with_freq(&self.path, self.resolved_format()?, Some(self.freq))?;
        if let Some(s) = series.iter().find(|s| s.freq != self.freq) {
            return Err(DatasetError::GridViolation {
                series: s.id.clone(),
                message: format!("frequency {} differs from the manifest's {}", s.freq, self.freq),
            });
        }
        Ok(series)
    }

    fn invalid(&self, message: String) -> DatasetError {
        DatasetError::Manifest { name: self.name.clone(), message }
    }
}

/// Reads a JSON manifest file holding one manifest or a list of them.
/// Relative dataset paths are resolved against the manifest's directory.
pub fn read_manifests(path: &Path) -> Result<Vec<DatasetManifest>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.into(), source })?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<DatasetManifest>),
        One(DatasetManifest),
    }
    let parsed: OneOrMany = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut manifests = match parsed {
        OneOrMany::Many(v) => v,
        OneOrMany::One(m) => vec![m],
    };
    let base = path.parent().unwrap_or(Path::new(""));
    for m in &mut manifests {
        if m.path.is_relative() {
            m.path = base.join(&m.path);
        }
    }
    Ok(manifests)
}

/// Parses `2020-01-01`, `2020-01-01 06:00[:00]`, `2020-01-01T06:00:00` and
/// RFC 3339 timestamps with an offset (converted to UTC).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?.and_hms_opt(0, 0, 0)
}

/// Loads every series of a dataset file.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<TimeSeries>, DatasetError> {
    load_dataset_with_freq(path, format, None)
}

/// Like [`load_dataset`]; `freq` is used for CSV items with a single row,
/// whose grid cannot be inferred.
pub fn load_dataset_with_freq(
    path: &Path,
    format: DatasetFormat,
    freq: Option<Frequency>,
) -> Result<Vec<TimeSeries>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io { path: path.into(), source })?;
    let series = match format {
        DatasetFormat::Jsonl => read_jsonl(path, BufReader::new(file))?,
        DatasetFormat::Csv => read_csv(path, file, freq)?,
    };
    series
        .into_iter()
        .map(|s| {
            let id = s.id.clone();
            validate_grid(s).map_err(|e| DatasetError::GridViolation { series: id, message: e.to_string() })
        })
        .collect()
}

#[derive(Deserialize)]
struct JsonlRow {
    id: String,
    start: String,
    freq: String,
    target: Vec<Option<f64>>,
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<TimeSeries>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let parse_err = |message: String| DatasetError::Parse { path: path.into(), line: line_no, message };
        let line = line.map_err(|source| DatasetError::Io { path: path.into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let start = parse_timestamp(&row.start).ok_or_else(|| parse_err(format!("bad timestamp `{}`", row.start)))?;
        let freq: Frequency = row.freq.parse().map_err(|e| parse_err(format!("{e}")))?;
        out.push(TimeSeries::new(row.id, start, freq, row.target));
    }
    Ok(out)
}

/// Grid step between two consecutive timestamps. Whole-month steps that keep
/// the time of day are read as monthly, quarterly or yearly.
pub fn infer_frequency(a: NaiveDateTime, b: NaiveDateTime) -> Option<Frequency> {
    if b <= a {
        return None;
    }
    let months = (b.year() - a.year()) * 12 + b.month() as i32 - a.month() as i32;
    if months > 0 {
        let months = months as u32;
        let (unit, mult) = if months.is_multiple_of(12) {
            (FrequencyUnit::Year, months / 12)
        } else if months.is_multiple_of(3) {
            (FrequencyUnit::Quarter, months / 3)
        } else {
            (FrequencyUnit::Month, months)
        };
        let f = Frequency::new(unit, mult).ok()?;
        if f.advance(a, 1) == Some(b) {
            return Some(f);
        }
    }
    let secs = (b - a).num_seconds();
    if secs <= 0 || (b - a).subsec_nanos() != 0 {
        return None;
    }
    let (unit, width) = [
        (FrequencyUnit::Week, 604_800),
        (FrequencyUnit::Day, 86_400),
        (FrequencyUnit::Hour, 3_600),
        (FrequencyUnit::Minute, 60),
        (FrequencyUnit::Second, 1),
    ]
    .into_iter()
    .find(|(_, w)| secs % w == 0)?;
    Frequency::new(unit, u32::try_from(secs / width).ok()?).ok()
}

fn read_csv(path: &Path, file: File, hint: Option<Frequency>) -> Result<Vec<TimeSeries>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header_err = |message: String| DatasetError::Parse { path: path.into(), line: 1, message };
    let headers = reader.headers().map_err(|e| header_err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| header_err(format!("missing column `{name}`")))
    };
    let (id_col, ts_col, y_col) = (col("item_id")?, col("timestamp")?, col("target")?);

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(NaiveDateTime, Option<f64>)>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Parse {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| DatasetError::Parse { path: path.into(), line, message };
        let id = record.get(id_col).unwrap_or_default().to_string();
        let raw_ts = record.get(ts_col).unwrap_or_default();
        let ts = parse_timestamp(raw_ts).ok_or_else(|| parse_err(format!("bad timestamp `{raw_ts}`")))?;
        let raw_y = record.get(y_col).unwrap_or_default();
        let y = match raw_y {
            "" | "null" | "NaN" | "nan" | "NA" => None,
            s => Some(s.parse::<f64>().map_err(|_| parse_err(format!("bad target `{s}`")))?),
        };
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        rows.entry(id).or_default().push((ts, y));
    }

    order
        .into_iter()
        .map(|id| {
            let mut points = rows.remove(&id).unwrap_or_default();
            points.sort_by_key(|p| p.0);
            let violation = |message: String| DatasetError::GridViolation { series: id.clone(), message };
            let start = points[0].0;
            let freq = match points.get(1) {
                Some(&(next, _)) => infer_frequency(start, next)
                    .ok_or_else(|| violation(format!("no regular step between {start} and {next}")))?,
                None => hint.ok_or_else(|| violation("a single row does not define a grid".into()))?,
            };
            for (t, &(ts, _)) in points.iter().enumerate() {
                let expected = freq.advance(start, t as i64);
                if expected != Some(ts) {
                    let expected = expected.map_or_else(|| "overflow".to_string(), |e| e.to_string());
                    return Err(violation(format!("row {t} is at {ts}, expected {expected} on a {freq} grid")));
                }
            }
            Ok(TimeSeries::new(id.clone(), start, freq, points.into_iter().map(|p| p.1).collect()))
        })
        .collect()
}

/// Writes series as JSONL lines in the format read by [`load_dataset`].
pub fn write_jsonl(series: &[TimeSeries], mut out: impl std::io::Write) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        id: &'a str,
        start: String,
        freq: String,
        target: &'a [Option<f64>],
    }
    for s in series {
        let row = Row {
            id: &s.id,
            start: s.start.format("%Y-%m-%d %H:%M:%S").to_string(),
            freq: s.freq.code(),
            target: &s.values,
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
