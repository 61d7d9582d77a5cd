//! Benchmark execution: one task per series, evaluated against Seasonal Naive.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tsfm_core::featurize::FeatureConfig;
use tsfm_core::metrics::{aggregate, mase_with_gaps, wql, EvalRecord, MetricsError, ModelSummary};
use tsfm_core::regress::{
    point_forecast, run_pipeline, PipelineOutput, PointMode, QuantileLevels, QuantilePrediction, Regressor,
    RegressorSpec, SeasonalNaive,
};
use tsfm_core::series::{ForecastTask, TimeSeries, DEFAULT_MAX_CONTEXT};

use crate::dataset::{DatasetError, DatasetManifest};

pub const BASELINE: &str = "seasonal_naive";

/// Context lengths of the context-length study.
pub const CONTEXT_PRESETS: [usize; 4] = [1024, 2048, 4096, 10_000];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("cannot write {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Everything that affects the numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub regressor: RegressorSpec,
    pub features: FeatureConfig,
    pub max_context: usize,
    pub quantile_levels: QuantileLevels,
    pub point_mode: PointMode,
    pub parallelism: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            regressor: RegressorSpec::Knn,
            features: FeatureConfig::default(),
            max_context: DEFAULT_MAX_CONTEXT,
            quantile_levels: QuantileLevels::fine_grid(),
            point_mode: PointMode::Median,
            parallelism: 1,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// WQL is scored on the 0.1..0.9 grid, so the predicted levels must contain it.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.max_context == 0 {
            return Err(BenchError::Config("max_context must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(BenchError::Config("parallelism must be positive".into()));
        }
        if let Some(q) = QuantileLevels::evaluation_grid()
            .as_slice()
            .iter()
            .find(|&&q| self.quantile_levels.position(q).is_none())
        {
            return Err(BenchError::Config(format!("quantile levels must include {q}")));
        }
        if self.point_mode == PointMode::Median && self.quantile_levels.position(0.5).is_none() {
            return Err(BenchError::Config("median point forecasts need the 0.5 level".into()));
        }
        Ok(())
    }
}

/// A series to evaluate: forecast the last `horizon` values from the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub task_id: String,
    pub series: TimeSeries,
    pub horizon: usize,
}

impl EvalTask {
    pub fn new(task_id: impl Into<String>, series: TimeSeries, horizon: usize) -> Self {
        Self { task_id: task_id.into(), series, horizon }
    }
}

/// Loaded series of one manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub series: Vec<TimeSeries>,
}

impl Dataset {
    pub fn tasks(&self) -> Vec<EvalTask> {
        self.series
            .iter()
            .map(|s| {
                let id = format!("{}/{}/{}", self.manifest.name, self.manifest.term, s.id);
                EvalTask::new(id, s.clone(), self.manifest.horizon)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub model: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// The evaluation window contains missing values.
    MissingTruth,
    /// The seasonal-naive in-sample error of the history is zero.
    MaseNotDefined,
    /// The evaluation window sums to zero in absolute value.
    WqlNotDefined,
    /// The series is not longer than the horizon.
    TooShort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub task_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTiming {
    pub task_id: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairCount {
    pub model: String,
    pub rows: usize,
}

/// Aggregates and bookkeeping written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub n_tasks: usize,
    pub n_evaluated: usize,
    pub models: Vec<ModelSummary>,
    pub monotonicity_repairs: Vec<RepairCount>,
    pub exclusions: Vec<Exclusion>,
    pub failures: Vec<TaskFailure>,
    pub wall_clock: Vec<TaskTiming>,
}

/// History kept for plots, in multiples of the horizon.
pub const PLOT_HISTORY_HORIZONS: usize = 4;

/// Forecast of one model on one task, kept for plots. `history` is the tail
/// of the history just before the forecast window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskForecast {
    pub task_id: String,
    pub model: String,
    pub history: Vec<Option<f64>>,
    pub truth: Vec<Option<f64>>,
    pub point: Vec<f64>,
    pub prediction: QuantilePrediction,
    pub context_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<EvalRecord>,
    pub summary: RunSummary,
    pub forecasts: Vec<TaskForecast>,
}

impl RunOutput {
    pub fn has_failures(&self) -> bool {
        !self.summary.failures.is_empty()
    }

    /// Records as JSON lines.
    pub fn records_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Writes `records.jsonl`, `summary.json` and `forecasts.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| BenchError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let records = dir.join(RECORDS_FILE);
        fs::write(&records, self.records_jsonl()).map_err(io(&records))?;
        let summary = dir.join(SUMMARY_FILE);
        let text = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        fs::write(&summary, text + "\n").map_err(io(&summary))?;
        let forecasts = dir.join(FORECASTS_FILE);
        let file = fs::File::create(&forecasts).map_err(io(&forecasts))?;
        let mut w = BufWriter::new(file);
        for f in &self.forecasts {
            serde_json::to_writer(&mut w, f).expect("forecasts serialize");
            w.write_all(b"\n").map_err(io(&forecasts))?;
        }
        w.flush().map_err(io(&forecasts))
    }
}

/// Applies `f` to every item on up to `workers` threads. Results keep the
/// input order whatever the completion order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let n = items.len();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            let tx = tx.clone();
            let (next, f) = (&next, &f);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n || tx.send((i, f(&items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            out[i] = Some(r);
        }
    });
    out.into_iter().map(|r| r.expect("every item is processed")).collect()
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FORECASTS_FILE: &str = "forecasts.jsonl";

/// Loads the manifests and runs every series of every dataset.
pub fn run_benchmark(manifests: &[DatasetManifest], config: &RunConfig) -> Result<RunOutput, BenchError> {
    if manifests.is_empty() {
        return Err(MetricsError::EmptyRecordSet.into());
    }
    let datasets = manifests
        .iter()
        .map(|m| Ok(Dataset { manifest: m.clone(), series: m.load()? }))
        .collect::<Result<Vec<_>, BenchError>>()?;
    let tasks: Vec<EvalTask> = datasets.iter().flat_map(Dataset::tasks).collect();
    run_tasks(tasks, config)
}

enum Outcome {
    Scored { records: Vec<EvalRecord>, forecasts: Vec<TaskForecast>, repairs: Vec<usize> },
    Excluded(ExclusionReason),
    Failed(TaskFailure),
}

struct TaskResult {
    outcome: Outcome,
    seconds: f64,
}

/// Evaluates in-memory tasks on a pool of `config.parallelism` worker threads.
/// Results are reported in task order whatever the completion order.
pub fn run_tasks(tasks: Vec<EvalTask>, config: &RunConfig) -> Result<RunOutput, BenchError> {
    config.validate()?;
    if tasks.is_empty() {
        return Err(MetricsError::EmptyRecordSet.into());
    }
    let mut spec = config.regressor.clone();
    if let RegressorSpec::External { max_in_flight, .. } = &mut spec {
        *max_in_flight = config.parallelism;
    }
    let model: Arc<dyn Regressor> =
        spec.build().map_err(|e| BenchError::Config(e.to_string()))?;
    let spec_label = spec.label().to_string();
    let models: Vec<(String, Arc<dyn Regressor>)> = if spec.label() == BASELINE {
        vec![(BASELINE.to_string(), model)]
    } else {
        vec![(BASELINE.to_string(), Arc::new(SeasonalNaive::default())), (spec.label().to_string(), model)]
    };

    let n_tasks = tasks.len();
    let results = parallel_map(&tasks, config.parallelism, |task| {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| evaluate(task, &models, config))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Outcome::Failed(TaskFailure { task_id: task.task_id.clone(), model: spec_label.clone(), error: msg })
        });
        TaskResult { outcome, seconds: started.elapsed().as_secs_f64() }
    });

    let mut records = Vec::new();
    let mut forecasts = Vec::new();
    let mut repairs = vec![0usize; models.len()];
    let mut exclusions = Vec::new();
    let mut failures = Vec::new();
    let mut wall_clock = Vec::new();
    let mut n_evaluated = 0;
    for (task, result) in tasks.iter().zip(results) {
        wall_clock.push(TaskTiming { task_id: task.task_id.clone(), seconds: result.seconds });
        match result.outcome {
            Outcome::Scored { records: r, forecasts: f, repairs: rep } => {
                n_evaluated += 1;
                records.extend(r);
                forecasts.extend(f);
                for (total, n) in repairs.iter_mut().zip(rep) {
                    *total += n;
                }
            }
            Outcome::Excluded(reason) => exclusions.push(Exclusion { task_id: task.task_id.clone(), reason }),
            Outcome::Failed(f) => failures.push(f),
        }
    }
    let summaries = if records.is_empty() { Vec::new() } else { aggregate(&records)? };
    let summary = RunSummary {
        config: RunConfig { regressor: spec, ..config.clone() },
        n_tasks,
        n_evaluated,
        models: summaries,
        monotonicity_repairs: models
            .iter()
            .zip(repairs)
            .map(|((name, _), rows)| RepairCount { model: name.clone(), rows })
            .collect(),
        exclusions,
        failures,
        wall_clock,
    };
    Ok(RunOutput { records, summary, forecasts })
}

struct Scored {
    mase: Option<f64>,
    wql: Option<f64>,
    output: PipelineOutput,
    point: Vec<f64>,
}

fn evaluate(task: &EvalTask, models: &[(String, Arc<dyn Regressor>)], config: &RunConfig) -> Outcome {
    let n = task.series.len();
    if n <= task.horizon {
        return Outcome::Excluded(ExclusionReason::TooShort);
    }
    let split = n - task.horizon;
    let truth_raw = &task.series.values[split..];
    let Some(truth) = truth_raw.iter().copied().collect::<Option<Vec<f64>>>() else {
        return Outcome::Excluded(ExclusionReason::MissingTruth);
    };
    let history = task.series.slice(0, split).expect("split inside the series");
    let m = history.freq.season_length(history.len());
    let fail = |model: &str, error: String| {
        Outcome::Failed(TaskFailure { task_id: task.task_id.clone(), model: model.to_string(), error })
    };
    let forecast_task = match ForecastTask::with_options(history.clone(), task.horizon, config.max_context, m) {
        Ok(t) => t,
        Err(e) => return fail(BASELINE, e.to_string()),
    };
    let eval_levels = QuantileLevels::evaluation_grid();

    let mut scored = Vec::with_capacity(models.len());
    for (name, regressor) in models {
        let result = run_pipeline(&forecast_task, &config.features, regressor.as_ref(), &config.quantile_levels)
            .map_err(|e| e.to_string())
            .and_then(|output| {
                let point = point_forecast(&output.prediction, config.point_mode).map_err(|e| e.to_string())?;
                let mase = mase_with_gaps(&truth, &point, &history.values, m).map_err(|e| e.to_string())?;
                let wql = wql(&truth, &output.prediction, &eval_levels).map_err(|e| e.to_string())?;
                Ok(Scored { mase, wql, output, point })
            });
        match result {
            Ok(s) => scored.push(s),
            Err(e) => return fail(name, e),
        }
    }
    if scored.iter().any(|s| s.mase.is_none()) {
        return Outcome::Excluded(ExclusionReason::MaseNotDefined);
    }
    if scored.iter().any(|s| s.wql.is_none()) {
        return Outcome::Excluded(ExclusionReason::WqlNotDefined);
    }
    let base_mase = scored[0].mase.expect("checked above");
    let base_wql = scored[0].wql.expect("checked above");
    let records = models
        .iter()
        .zip(&scored)
        .map(|((name, _), s)| {
            EvalRecord::relative_to(&task.task_id, name, s.mase.unwrap(), s.wql.unwrap(), base_mase, base_wql)
        })
        .collect();
    let repairs = scored.iter().map(|s| s.output.repaired_rows).collect();
    let forecasts = models
        .iter()
        .zip(scored)
        .map(|((name, _), s)| TaskForecast {
            task_id: task.task_id.clone(),
            model: name.clone(),
            history: history.values[split - split.min(PLOT_HISTORY_HORIZONS * task.horizon)..].to_vec(),
            truth: truth_raw.to_vec(),
            point: s.point,
            prediction: s.output.prediction,
            context_len: s.output.context_len,
        })
        .collect();
    Outcome::Scored { records, forecasts, repairs }
}
