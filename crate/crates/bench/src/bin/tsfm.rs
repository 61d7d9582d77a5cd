use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tsfm_bench::dataset::{load_dataset, read_manifests, write_jsonl, DatasetError, DatasetFormat, DatasetManifest, Term};
use tsfm_bench::echo::{self, EchoMode};
use tsfm_bench::report::{load_run, summary_text, write_report, PlotSelection};
use tsfm_bench::runner::{parallel_map, run_benchmark, run_tasks, BenchError, EvalTask, RunConfig, RunOutput};
use tsfm_bench::suites;
use tsfm_core::featurize::FeatureConfig;
use tsfm_core::regress::{point_forecast, run_pipeline, PointMode, QuantileLevels, RegressorSpec};
use tsfm_core::seasonal::detect_seasonalities;
use tsfm_core::series::{split_context_horizon, ForecastTask, TimeSeries, DEFAULT_MAX_CONTEXT};
use tsfm_core::synth::{gen_pattern, sub_seed, SynthKind, SynthSpec};

/// Zero-shot quantile forecasting with tabular regressors on engineered time features.
#[derive(Parser)]
#[command(name = "tsfm", version)]
struct Cli {
    /// Seed for synthetic data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; also bounds concurrent requests to an external endpoint.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Comma separated quantile levels [default: 0.05,0.10,...,0.95].
    #[arg(long, global = true, value_parser = parse_levels)]
    quantiles: Option<QuantileLevels>,
    /// Most recent steps used as context.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_CONTEXT)]
    max_context: usize,
    /// Feature blocks: any of calendar, seasonal, index.
    #[arg(long, global = true, default_value = "calendar,seasonal,index")]
    features: String,
    /// Number of detected seasonalities encoded as features.
    #[arg(long, global = true, default_value_t = 5)]
    k_seasonal: usize,
    /// knn, seasonal_naive or external [default: external with --endpoint, knn otherwise].
    #[arg(long, global = true)]
    regressor: Option<String>,
    /// Base URL of an external regressor.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Request timeout for the external regressor, in milliseconds.
    #[arg(long, global = true, default_value_t = 60_000)]
    timeout_ms: u64,
    /// Point forecast used for MASE.
    #[arg(long, global = true, default_value = "median")]
    point_mode: PointMode,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// Hourly trend plus daily and off-calendar cycles.
    Periodic,
    /// One series per generator kind, 1000 points.
    Qualitative,
    /// Every synthetic suite.
    Synthetic,
}

#[derive(Subcommand)]
enum Command {
    /// Forecast past the end of every series in a dataset and print JSON lines.
    Forecast {
        data: PathBuf,
        #[arg(long)]
        format: Option<DatasetFormat>,
        #[arg(long)]
        horizon: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Evaluate against Seasonal Naive and write records.jsonl, summary.json and forecasts.jsonl.
    Eval {
        /// JSON manifest files (one manifest or a list).
        #[arg(long)]
        manifest: Vec<PathBuf>,
        /// Dataset files evaluated with the horizon of --term.
        #[arg(long)]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "short")]
        term: Term,
        /// Built-in synthetic suite.
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long, short, default_value = "tsfm-run")]
        out: PathBuf,
        /// Also write the report into the output directory.
        #[arg(long)]
        report: bool,
    },
    /// Print the dominant seasonalities of every series.
    Detect {
        data: PathBuf,
        #[arg(long)]
        format: Option<DatasetFormat>,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Write synthetic series in the JSONL dataset format.
    Synth {
        #[arg(long, default_value = "additive_combo")]
        kind: SynthKind,
        /// Generator parameter, `name=value`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Write a built-in suite instead.
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Render the score table, summary and forecast plots of a finished run.
    Report {
        run: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Task or series id to plot; repeatable. All by default.
        #[arg(long)]
        series: Vec<String>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Serve the external regressor protocol without a model.
    ServeEcho {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// mean, crossing, malformed, error, slow or slow:<ms>.
        #[arg(long, default_value = "mean")]
        mode: EchoMode,
    },
}

/// Bad input rather than a failed computation; exits with 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_levels(s: &str) -> Result<QuantileLevels, String> {
    let levels = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    QuantileLevels::new(levels).map_err(|e| e.to_string())
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v = v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn color(code: &str, text: &str) -> String {
    let disabled = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
    if disabled || !io::stderr().is_terminal() {
        text.to_string()
    } else {
        format!("\x1b[{code}m{text}\x1b[0m")
    }
}

impl Cli {
    fn parallelism(&self) -> usize {
        self.parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    fn levels(&self) -> QuantileLevels {
        self.quantiles.clone().unwrap_or_default()
    }

    fn features(&self) -> Result<FeatureConfig> {
        FeatureConfig::from_flags(&self.features, self.k_seasonal).map_err(usage)
    }

    fn regressor(&self) -> Result<RegressorSpec> {
        let kind = self
            .regressor
            .clone()
            .unwrap_or_else(|| if self.endpoint.is_some() { "external" } else { "knn" }.to_string());
        let mut params = BTreeMap::new();
        if let Some(e) = &self.endpoint {
            params.insert("endpoint".to_string(), e.clone());
        }
        params.insert("timeout_ms".to_string(), self.timeout_ms.to_string());
        params.insert("max_in_flight".to_string(), self.parallelism().to_string());
        RegressorSpec::from_params(&kind, &params).map_err(|e| usage(e.to_string()))
    }

    fn run_config(&self) -> Result<RunConfig> {
        let config = RunConfig {
            regressor: self.regressor()?,
            features: self.features()?,
            max_context: self.max_context,
            quantile_levels: self.levels(),
            point_mode: self.point_mode,
            parallelism: self.parallelism(),
            seed: self.seed,
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        Ok(config)
    }
}

fn read_data(path: &Path, format: Option<DatasetFormat>) -> Result<Vec<TimeSeries>> {
    let format = format
        .or_else(|| DatasetFormat::from_path(path))
        .ok_or_else(|| usage(format!("cannot tell the format of {}; pass --format", path.display())))?;
    Ok(load_dataset(path, format)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn forecast(cli: &Cli, data: &Path, format: Option<DatasetFormat>, horizon: usize, out: Option<&Path>) -> Result<ExitCode> {
    let series = read_data(data, format)?;
    let regressor = cli.regressor()?.build().map_err(|e| usage(e.to_string()))?;
    let features = cli.features()?;
    let levels = cli.levels();
    if cli.point_mode == PointMode::Median && levels.position(0.5).is_none() {
        return Err(usage("median point forecasts need the 0.5 level"));
    }
    let lines = parallel_map(&series, cli.parallelism(), |s| -> Result<serde_json::Value> {
        let m = s.freq.season_length(s.len());
        let task = ForecastTask::with_options(s.clone(), horizon, cli.max_context, m)?;
        let (_, future) = split_context_horizon(&task)?;
        let result = run_pipeline(&task, &features, regressor.as_ref(), &levels)?;
        let point = point_forecast(&result.prediction, cli.point_mode)?;
        let timestamps: Vec<String> = future.iter().map(|t| t.format("%Y-%m-%d %H:%M:%S").to_string()).collect();
        Ok(json!({
            "id": s.id,
            "timestamps": timestamps,
            "levels": levels.as_slice(),
            "quantiles": result.prediction.values,
            "point": point,
        }))
    });
    let mut w = output(out)?;
    let mut failed = 0;
    for (s, line) in series.iter().zip(lines) {
        match line {
            Ok(v) => writeln!(w, "{v}")?,
            Err(e) => {
                failed += 1;
                eprintln!("{} series `{}`: {e:#}", color("31", "error:"), s.id);
            }
        }
    }
    w.flush()?;
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn suite_tasks(suite: Suite, seed: u64) -> Vec<EvalTask> {
    match suite {
        Suite::Periodic => suites::periodic_trend_suite(24, seed),
        Suite::Qualitative => suites::qualitative_suite(seed),
        Suite::Synthetic => suites::full_synthetic_suite(seed),
    }
}

fn data_manifest(path: &Path, term: Term) -> Result<DatasetManifest> {
    let series = read_data(path, None)?;
    let first = series.first().ok_or_else(|| usage(format!("{} holds no series", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();
    Ok(DatasetManifest::new(name, path, first.freq, term))
}

fn eval(cli: &Cli, manifests: &[PathBuf], data: &[PathBuf], term: Term, suite: Option<Suite>, out: &Path, report: bool) -> Result<ExitCode> {
    let config = cli.run_config()?;
    let mut all = Vec::new();
    for m in manifests {
        all.extend(read_manifests(m)?);
    }
    for d in data {
        all.push(data_manifest(d, term)?);
    }
    let run: RunOutput = match (suite, all.is_empty()) {
        (Some(s), true) => run_tasks(suite_tasks(s, cli.seed), &config)?,
        (Some(_), false) => return Err(usage("--suite cannot be combined with --manifest or --data")),
        (None, true) => return Err(usage("nothing to evaluate: pass --manifest, --data or --suite")),
        (None, false) => run_benchmark(&all, &config)?,
    };
    run.write(out)?;
    if report {
        write_report(&run, out, &PlotSelection::default())?;
    }
    print!("{}", summary_text(&run.summary));
    println!("results in {}", out.display());
    if run.has_failures() {
        eprintln!("{} {} task(s) failed", color("31", "error:"), run.summary.failures.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn detect(cli: &Cli, data: &Path, format: Option<DatasetFormat>, k: usize) -> Result<ExitCode> {
    let series = read_data(data, format)?;
    let mut w = output(None)?;
    for s in &series {
        let from = s.len() - s.len().min(cli.max_context);
        let set = detect_seasonalities(&s.values[from..], k);
        let line = json!({
            "id": s.id,
            "frequencies": set.freqs,
            "periods": set.periods(),
            "magnitudes": set.magnitudes,
        });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn synth(cli: &Cli, kind: SynthKind, params: &[(String, f64)], length: usize, count: usize, suite: Option<Suite>, out: Option<&Path>) -> Result<ExitCode> {
    let series: Vec<TimeSeries> = match suite {
        Some(s) => suite_tasks(s, cli.seed).into_iter().map(|t| t.series).collect(),
        None => (0..count)
            .map(|i| {
                let seed = if count == 1 { cli.seed } else { sub_seed(cli.seed, i as u64) };
                let spec = params.iter().fold(SynthSpec::new(kind, length, seed), |s, (k, v)| s.with(k, *v));
                gen_pattern(&spec).map_err(|e| usage(e.to_string()))
            })
            .collect::<Result<_>>()?,
    };
    let mut w = output(out)?;
    write_jsonl(&series, &mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn serve_echo(host: &str, port: u16, mode: EchoMode) -> Result<ExitCode> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await.with_context(|| format!("binding {host}:{port}"))?;
        eprintln!("echo server ({mode:?}) listening on http://{}", listener.local_addr()?);
        let requests = Default::default();
        echo::serve(listener, mode, requests, std::future::pending()).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Forecast { data, format, horizon, out } => forecast(cli, data, *format, *horizon, out.as_deref()),
        Command::Eval { manifest, data, term, suite, out, report } => {
            eval(cli, manifest, data, *term, *suite, out, *report)
        }
        Command::Detect { data, format, k } => detect(cli, data, *format, *k),
        Command::Synth { kind, params, length, count, suite, out } => {
            synth(cli, *kind, params, *length, *count, *suite, out.as_deref())
        }
        Command::Report { run, out, series, model } => {
            let output = load_run(run)?;
            let selection = PlotSelection { series: series.clone(), model: model.clone() };
            let written = write_report(&output, out.as_deref().unwrap_or(run), &selection)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ServeEcho { host, port, mode } => serve_echo(host, *port, *mode),
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<UsageError>()
            || c.is::<DatasetError>()
            || matches!(c.downcast_ref::<BenchError>(), Some(BenchError::Dataset(_) | BenchError::Config(_)))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) if e.chain().any(|c| c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{} {e:#}", color("31", "error:"));
            if is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
