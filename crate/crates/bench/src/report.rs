//! Score tables and forecast plots from a finished run.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tsfm_core::metrics::EvalRecord;

use crate::runner::{BenchError, RunOutput, RunSummary, TaskForecast, FORECASTS_FILE, RECORDS_FILE, SUMMARY_FILE};

pub const REPORT_FILE: &str = "report.md";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const PLOT_DIR: &str = "plots";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError {
    let path = path.display().to_string();
    move |source| BenchError::Io { path, source }
}

fn parse_err(path: &Path, line: usize, e: serde_json::Error) -> BenchError {
    BenchError::Dataset(crate::dataset::DatasetError::Parse { path: path.into(), line, message: e.to_string() })
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, BenchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(path, i + 1, e)))
        .collect()
}

/// Reads back the files written by [`RunOutput::write`].
pub fn load_run(dir: &Path) -> Result<RunOutput, BenchError> {
    let records = read_jsonl(&dir.join(RECORDS_FILE))?;
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
    let summary: RunSummary = serde_json::from_str(&text).map_err(|e| parse_err(&summary_path, e.line(), e))?;
    let forecasts_path = dir.join(FORECASTS_FILE);
    let forecasts = if forecasts_path.exists() { read_jsonl(&forecasts_path)? } else { Vec::new() };
    Ok(RunOutput { records, summary, forecasts })
}

fn fmt_score(v: f64) -> String {
    format!("{v:.4}")
}

/// Per-task MASE and WQL of every model, one row per task and a final row
/// with the geometric means of the scores relative to Seasonal Naive.
pub fn score_table(records: &[EvalRecord], summary: &RunSummary) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut tasks: Vec<&str> = Vec::new();
    for r in records {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        if !tasks.contains(&r.task_id.as_str()) {
            tasks.push(&r.task_id);
        }
    }
    let mut out = String::from("| Task |");
    for m in &models {
        let _ = write!(out, " {m} MASE | {m} WQL |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|---:|".repeat(models.len()));
    out.push('\n');
    for task in &tasks {
        let _ = write!(out, "| {task} |");
        for m in &models {
            match records.iter().find(|r| r.task_id == *task && r.model == *m) {
                Some(r) => {
                    let _ = write!(out, " {} | {} |", fmt_score(r.mase), fmt_score(r.wql));
                }
                None => out.push_str(" - | - |"),
            }
        }
        out.push('\n');
    }
    out.push_str("| **Geo. mean (relative)** |");
    for m in &models {
        match summary.models.iter().find(|s| s.model == *m) {
            Some(s) => {
                let _ = write!(out, " {} | {} |", fmt_score(s.geo_mean_rel_mase), fmt_score(s.geo_mean_rel_wql));
            }
            None => out.push_str(" - | - |"),
        }
    }
    out.push('\n');
    out
}

/// Plain-text aggregate: per-model means and the run bookkeeping.
pub fn summary_text(summary: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "regressor: {}  features: {}  max_context: {}  seed: {}",
        summary.config.regressor.label(),
        summary.config.features.label(),
        summary.config.max_context,
        summary.config.seed
    );
    let _ = writeln!(out, "tasks: {}  evaluated: {}", summary.n_tasks, summary.n_evaluated);
    let _ = writeln!(
        out,
        "{:<16} {:>7} {:>12} {:>12} {:>10} {:>10}",
        "model", "tasks", "rel MASE", "rel WQL", "rank MASE", "rank WQL"
    );
    for s in &summary.models {
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>12.4} {:>12.4} {:>10.3} {:>10.3}",
            s.model, s.n_tasks, s.geo_mean_rel_mase, s.geo_mean_rel_wql, s.mean_rank_mase, s.mean_rank_wql
        );
    }
    for r in &summary.monotonicity_repairs {
        let _ = writeln!(out, "repaired quantile rows ({}): {}", r.model, r.rows);
    }
    let _ = writeln!(out, "excluded: {}", summary.exclusions.len());
    for e in &summary.exclusions {
        let _ = writeln!(out, "  {} ({:?})", e.task_id, e.reason);
    }
    let _ = writeln!(out, "failed: {}", summary.failures.len());
    for f in &summary.failures {
        let _ = writeln!(out, "  {} [{}]: {}", f.task_id, f.model, f.error);
    }
    let total: f64 = summary.wall_clock.iter().map(|t| t.seconds).sum();
    let _ = writeln!(out, "task time: {total:.3} s");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn level_or_edge(f: &TaskForecast, q: f64, upper: bool) -> Vec<f64> {
    f.prediction.level(q).unwrap_or_else(|| {
        let j = if upper { f.prediction.levels.len() - 1 } else { 0 };
        f.prediction.values.iter().map(|row| row[j]).collect()
    })
}

/// SVG line chart of the history tail, the truth, the point forecast and the
/// band between the 0.1 and 0.9 quantiles.
pub fn forecast_svg(f: &TaskForecast) -> String {
    const W: f64 = 800.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let lo = level_or_edge(f, 0.1, false);
    let hi = level_or_edge(f, 0.9, true);
    let n_hist = f.history.len();
    let n_total = n_hist + f.point.len();

    let values = f
        .history
        .iter()
        .chain(&f.truth)
        .filter_map(|v| *v)
        .chain(lo.iter().copied())
        .chain(hi.iter().copied())
        .chain(f.point.iter().copied());
    let (mut ymin, mut ymax) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !ymin.is_finite() {
        (ymin, ymax) = (0.0, 1.0);
    }
    if ymax - ymin < 1e-12 {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / (n_total.max(2) - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - ymin) / (ymax - ymin);
    let path = |pts: &mut dyn Iterator<Item = (usize, f64)>| {
        pts.map(|(t, v)| format!("{:.2},{:.2}", x(t), y(v))).collect::<Vec<_>>().join(" ")
    };
    // missing values split a series into separate segments
    let segments = |offset: usize, vals: &[Option<f64>]| {
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
        for (i, v) in vals.iter().enumerate() {
            match v {
                Some(v) => out.last_mut().expect("non-empty").push((offset + i, *v)),
                None if !out.last().expect("non-empty").is_empty() => out.push(Vec::new()),
                None => {}
            }
        }
        out.retain(|s| !s.is_empty());
        out
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, "<title>{} ({})</title>", escape(&f.task_id), escape(&f.model));
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{PAD}" x2="{:.2}" y2="{:.2}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        x(n_hist),
        x(n_hist),
        H - PAD
    );
    let band: String = path(&mut lo.iter().enumerate().map(|(h, v)| (n_hist + h, *v)))
        + " "
        + &path(&mut hi.iter().enumerate().rev().map(|(h, v)| (n_hist + h, *v)));
    let _ = writeln!(
        svg,
        r##"<polygon class="band" points="{band}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>"##
    );
    for seg in segments(0, &f.history) {
        let _ = writeln!(
            svg,
            r##"<polyline class="history" points="{}" fill="none" stroke="#333333" stroke-width="1.2"/>"##,
            path(&mut seg.into_iter())
        );
    }
    for seg in segments(n_hist, &f.truth) {
        let _ = writeln!(
            svg,
            r##"<polyline class="truth" points="{}" fill="none" stroke="#333333" stroke-width="1.2" stroke-dasharray="3 2"/>"##,
            path(&mut seg.into_iter())
        );
    }
    let _ = writeln!(
        svg,
        r##"<polyline class="forecast" points="{}" fill="none" stroke="#1f77b4" stroke-width="1.6"/>"##,
        path(&mut f.point.iter().enumerate().map(|(h, v)| (n_hist + h, *v)))
    );
    let _ = writeln!(
        svg,
        r##"<text x="{PAD}" y="20" font-family="sans-serif" font-size="13">{} · {} · band 10-90%</text>"##,
        escape(&f.task_id),
        escape(&f.model)
    );
    for (v, label) in [(ymin, ymin), (ymax, ymax)] {
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.2}" font-family="sans-serif" font-size="10">{label:.3}</text>"#,
            y(v)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn file_stem(task_id: &str, model: &str) -> String {
    format!("{task_id}__{model}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Which forecasts get a plot.
#[derive(Debug, Clone, Default)]
pub struct PlotSelection {
    /// Task ids or series ids (the last `/` component of a task id); empty means all.
    pub series: Vec<String>,
    /// Model to plot; `None` plots every model.
    pub model: Option<String>,
}

impl PlotSelection {
    fn wants(&self, f: &TaskForecast) -> bool {
        let series_ok = self.series.is_empty()
            || self
                .series
                .iter()
                .any(|s| *s == f.task_id || f.task_id.rsplit('/').next() == Some(s.as_str()));
        series_ok && self.model.as_ref().is_none_or(|m| *m == f.model)
    }
}

/// Writes `report.md`, `summary.txt` and one SVG per selected forecast into
/// `out_dir`. Returns the written paths.
pub fn write_report(run: &RunOutput, out_dir: &Path, selection: &PlotSelection) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let summary = summary_text(&run.summary);
    let mut md = String::from("# Benchmark report\n\n");
    md.push_str(&score_table(&run.records, &run.summary));
    md.push_str("\n## Summary\n\n```text\n");
    md.push_str(&summary);
    md.push_str("```\n");

    let plot_dir = out_dir.join(PLOT_DIR);
    let chosen: Vec<&TaskForecast> = run.forecasts.iter().filter(|f| selection.wants(f)).collect();
    if !chosen.is_empty() {
        fs::create_dir_all(&plot_dir).map_err(io_err(&plot_dir))?;
        md.push_str("\n## Forecasts\n\n");
    }
    let mut seen = BTreeSet::new();
    for f in chosen {
        let mut stem = file_stem(&f.task_id, &f.model);
        while !seen.insert(stem.clone()) {
            stem.push('_');
        }
        let path = plot_dir.join(format!("{stem}.svg"));
        fs::write(&path, forecast_svg(f)).map_err(io_err(&path))?;
        let _ = writeln!(md, "![{} ({})]({PLOT_DIR}/{stem}.svg)\n", f.task_id, f.model);
        written.push(path);
    }

    let md_path = out_dir.join(REPORT_FILE);
    fs::write(&md_path, md).map_err(io_err(&md_path))?;
    written.insert(0, md_path);
    let summary_path = out_dir.join(SUMMARY_TEXT_FILE);
    fs::write(&summary_path, summary).map_err(io_err(&summary_path))?;
    written.insert(1, summary_path);
    Ok(written)
}
