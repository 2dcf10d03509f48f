//! Experiment configs, orchestration of the checks, parameter scans, and the
//! JSON, CSV and SVG artifacts they produce.

mod config;
mod format;
mod run;
mod scan;

pub use config::{CheckKind, ExperimentConfig, Family};
pub use format::{csv_number, svg_plot, to_json, Series, SeriesStyle, PALETTE};
pub use run::{run_experiment, with_workers, CheckOutput, CheckSummary, ReportBundle};
pub use scan::{scan_family, Consistency, ScanResult, ScanRow};
