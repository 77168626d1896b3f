//! Batch evaluation driven by a config file.
//!
//! [`RunConfig`] names the observed and forecast files (or a synthetic
//! scenario), the features and measures to rank on and the outputs to
//! write. [`run_pipeline`] evaluates every region in parallel and collects
//! the results into a [`ReportBundle`], which [`write_outputs`] turns into
//! CSV tables, a JSON bundle and SVG plots.
//!
//! Defaults: take-off window 2 weeks, take-off threshold 150 cases per week,
//! bootstrap size 10000, Forecasting mode, the six selected measures and the
//! eight default features.

mod config;
mod ingest;
mod output;
mod pipeline;
mod svg;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    EvaluationSection, FeatureSection, InputSection, OutputFormat, OutputSection, RunConfig, StochasticSection,
    SyntheticSection,
};
pub use ingest::{
    ingest_forecasts, ingest_observed, parse_forecasts, parse_observed, DeterministicForecast, IngestedForecast,
};
pub use output::{csv_tables, export_inputs, read_json, write_csv, write_json, write_outputs};
pub use pipeline::{
    evaluate_region, run_pipeline, run_with_inputs, EvalSettings, FeatureReport, OneStepReport, Overall,
    PipelineInputs, RegionFailure, RegionReport, ReportBundle, StochasticReport,
};
pub use svg::emit_plots;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("method {method} mixes forecast kinds ({first} and {second})")]
    MixedForecastKinds {
        method: String,
        first: &'static str,
        second: &'static str,
    },
    #[error(transparent)]
    Curve(#[from] crate::curve::CurveError),
    #[error(transparent)]
    Harness(#[from] crate::harness::HarnessError),
    #[error(transparent)]
    Ranking(#[from] crate::ranking::RankingError),
    #[error(transparent)]
    Measure(#[from] crate::measures::MeasureError),
    #[error(transparent)]
    Stochastic(#[from] crate::stochastic::StochasticError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("region {region}: {message}")]
    Region { region: String, message: String },
}

impl ReportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReportError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ReportError>;
