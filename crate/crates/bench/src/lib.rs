//! Benchmark harness around `tsfm-core`: dataset files, the evaluation loop,
//! reports, synthetic suites and a reference server for the external
//! regressor protocol.

pub mod dataset;
pub mod echo;
pub mod report;
pub mod runner;
pub mod suites;

pub use dataset::{load_dataset, DatasetError, DatasetFormat, DatasetManifest, Term};
pub use runner::{run_benchmark, run_tasks, BenchError, EvalTask, RunConfig, RunOutput};
