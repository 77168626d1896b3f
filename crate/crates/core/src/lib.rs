//! Evaluation and ranking of epidemic forecasting methods.
//!
//! The crate turns observed surveillance curves and forecast runs into
//! epidemiological feature errors, scores them under a family of error
//! measures and aggregates the scores into consensus and horizon rankings.
//! Stochastic forecasts are handled by replicate measures, bootstrap
//! sampling and distances between predictive densities.
//!
//! Module map:
//!
//! - [`curve`]: observed curves, forecast runs, stochastic predictions
//! - [`features`]: peak, take-off, intensity duration, speed, attack rates,
//!   season start
//! - [`measures`]: MAE, RMSE, MAPE family, relative and scaled errors
//! - [`ranking`]: competition ranks, consensus levels, horizon ranking,
//!   MAPE clusters
//! - [`stochastic`]: replicate measures, sampling, density distances
//! - [`harness`]: synthetic curves and perturbed forecasters
//! - [`report`]: file ingestion, the evaluation pipeline and report output

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod features;
pub mod harness;
pub mod measures;
pub mod ranking;
pub mod report;
pub mod stats;
pub mod stochastic;

pub use curve::{
    align, validate_curve, AlignedPairs, CurveError, DistKind, DistSpec, EpiCurve, EvaluationMode, ForecastRun,
    ForecastSet, Replicates, StochasticSeries, Week, WeekPrediction, WeeklySeries,
};
pub use features::{FeatureConfig, FeatureId, FeatureVector};
pub use measures::{compute_measure, EpsilonPolicy, FeatureErrorSeries, MeasureId, MeasureOptions};
pub use ranking::{ConsensusTable, ErrorMatrix, HorizonRanking, MapeGroup, RankMatrix};
pub use report::{run_pipeline, ReportBundle, RunConfig};
pub use stochastic::{pdf_distance, sample_pdf, DistanceMethod, PdfDistance, SamplingOptions};
