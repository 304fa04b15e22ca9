//! The benchmark, training and evaluation harness behind the `lidarseg`
//! binary. Every command takes a [`RunConfig`] and writes a JSON report plus
//! a CSV table into the run's output directory.

mod commands;
mod config;
mod dataset;
mod report;

pub use commands::{
    augment_preview, bench_dataflows_with, cmd_augment_preview, cmd_bench_dataflows, cmd_eval, cmd_train, evaluate,
    BenchReport, BenchRow, BenchWorkload, ConvExecutor, EngineExecutor, EvalClassRow, EvalReport, PreviewReport,
    TrainRunReport, GATE_TOLERANCE,
};
pub use config::{BenchSection, DataflowSelection, DatasetConfig, EvalSection, RunConfig, TrainSection};
pub use dataset::{load_scenes, Scenes};
pub use report::{emit_report, render_report, Environment, Report, ReportFormat};
