//! Deterministic error measures over paired series and per-feature errors.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{EvaluationMode, ForecastSet, Week, WeeklySeries};
use crate::features::{extract_features, FeatureConfig, FeatureContext, FeatureId, FeatureVector};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("observed has {observed} values, predicted has {predicted}")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("{measure} needs at least {needed} values, got {got}")]
    TooShort {
        measure: MeasureId,
        needed: usize,
        got: usize,
    },
    #[error("{measure}: division by zero at position {index}")]
    DivisionByZero { measure: MeasureId, index: usize },
    #[error("{0} is a scalar measure; pass a single pair")]
    ScalarOnly(MeasureId),
    #[error("{0} is not a median measure")]
    NotMedian(MeasureId),
    #[error("random-walk reference has {got} values, expected {expected}")]
    ReferenceMismatch { expected: usize, got: usize },
    #[error("non-finite input at position {0}")]
    NonFinite(usize),
    #[error("observed curve has no {0}")]
    ObservedFeatureAbsent(FeatureId),
    #[error("observed feature extraction failed: {0}")]
    Feature(#[from] crate::features::FeatureError),
    #[error("missing runs for prediction times {0:?}")]
    MissingRun(Vec<Week>),
    #[error("invalid prediction-time range {0}..={1}")]
    InvalidRange(Week, Week),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasureId {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "RMSE")]
    Rmse,
    #[serde(rename = "MAPE")]
    Mape,
    #[serde(rename = "cMAPE")]
    CMape,
    #[serde(rename = "sMAPE")]
    Smape,
    #[serde(rename = "MdAPE")]
    MdApe,
    #[serde(rename = "MdsAPE")]
    MdsApe,
    #[serde(rename = "MARE")]
    Mare,
    #[serde(rename = "RelMAE")]
    RelMae,
    #[serde(rename = "MASE")]
    Mase,
    #[serde(rename = "PB")]
    Pb,
    #[serde(rename = "MAAPE")]
    Maape,
    #[serde(rename = "NMSE")]
    Nmse,
    #[serde(rename = "APE")]
    Ape,
    #[serde(rename = "sAPE")]
    Sape,
}

impl MeasureId {
    pub const ALL: [MeasureId; 15] = [
        MeasureId::Mae,
        MeasureId::Rmse,
        MeasureId::Mape,
        MeasureId::CMape,
        MeasureId::Smape,
        MeasureId::MdApe,
        MeasureId::MdsApe,
        MeasureId::Mare,
        MeasureId::RelMae,
        MeasureId::Mase,
        MeasureId::Pb,
        MeasureId::Maape,
        MeasureId::Nmse,
        MeasureId::Ape,
        MeasureId::Sape,
    ];

    /// The six measures used to score features.
    pub const SELECTED: [MeasureId; 6] = [
        MeasureId::Mae,
        MeasureId::Rmse,
        MeasureId::Mape,
        MeasureId::Smape,
        MeasureId::MdApe,
        MeasureId::MdsApe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureId::Mae => "MAE",
            MeasureId::Rmse => "RMSE",
            MeasureId::Mape => "MAPE",
            MeasureId::CMape => "cMAPE",
            MeasureId::Smape => "sMAPE",
            MeasureId::MdApe => "MdAPE",
            MeasureId::MdsApe => "MdsAPE",
            MeasureId::Mare => "MARE",
            MeasureId::RelMae => "RelMAE",
            MeasureId::Mase => "MASE",
            MeasureId::Pb => "PB",
            MeasureId::Maape => "MAAPE",
            MeasureId::Nmse => "NMSE",
            MeasureId::Ape => "APE",
            MeasureId::Sape => "sAPE",
        }
    }

    /// Percent Better counts wins, so larger is better. All other measures
    /// are errors.
    pub fn lower_is_better(self) -> bool {
        self != MeasureId::Pb
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, MeasureId::Ape | MeasureId::Sape)
    }

    fn min_len(self) -> usize {
        match self {
            MeasureId::Mase | MeasureId::Nmse => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MeasureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim();
        MeasureId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(key))
            .ok_or_else(|| format!("unknown measure '{s}'"))
    }
}

/// Treatment of zero observations in percentage measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// Zero observations are an error.
    Strict,
    /// Zero observations are offset by epsilon; `None` uses the smallest
    /// non-zero observed magnitude.
    Corrected(Option<f64>),
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy::Corrected(None)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MeasureOptions<'a> {
    pub epsilon: EpsilonPolicy,
    /// Reference forecast for MARE, RelMAE and PB. Defaults to the one-step
    /// naive forecast of the observed series.
    pub rw_reference: Option<&'a [f64]>,
}

/// One-step naive forecast: `y(t-1)`, with the first week repeating itself.
pub fn random_walk_reference(observed: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(observed.len());
    if let Some(&first) = observed.first() {
        out.push(first);
        out.extend_from_slice(&observed[..observed.len() - 1]);
    }
    out
}

fn check_pair(observed: &[f64], predicted: &[f64]) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(MeasureError::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(MeasureError::EmptySeries);
    }
    for (i, (y, x)) in observed.iter().zip(predicted).enumerate() {
        if !y.is_finite() || !x.is_finite() {
            return Err(MeasureError::NonFinite(i));
        }
    }
    Ok(())
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

fn epsilon_for(observed: &[f64], policy: EpsilonPolicy) -> Option<f64> {
    match policy {
        EpsilonPolicy::Strict => None,
        EpsilonPolicy::Corrected(Some(e)) => Some(e),
        EpsilonPolicy::Corrected(None) => observed
            .iter()
            .map(|y| y.abs())
            .filter(|&y| y > 0.0)
            .min_by(f64::total_cmp),
    }
}

fn ape_terms(measure: MeasureId, observed: &[f64], predicted: &[f64], policy: EpsilonPolicy) -> Result<Vec<f64>> {
    let eps = epsilon_for(observed, policy);
    observed
        .iter()
        .zip(predicted)
        .enumerate()
        .map(|(i, (&y, &x))| {
            let e = (y - x).abs();
            if y != 0.0 {
                Ok(e / y.abs())
            } else {
                match eps {
                    Some(eps) => Ok(e / (y + eps).abs()),
                    None => Err(MeasureError::DivisionByZero { measure, index: i }),
                }
            }
        })
        .collect()
}

fn sape_terms(measure: MeasureId, observed: &[f64], predicted: &[f64]) -> Result<Vec<f64>> {
    observed
        .iter()
        .zip(predicted)
        .enumerate()
        .map(|(i, (&y, &x))| {
            let denom = y.abs() + x.abs();
            if denom == 0.0 {
                Err(MeasureError::DivisionByZero { measure, index: i })
            } else {
                Ok(2.0 * (y - x).abs() / denom)
            }
        })
        .collect()
}

fn rw_errors(observed: &[f64], opts: &MeasureOptions<'_>) -> Result<Vec<f64>> {
    let reference = match opts.rw_reference {
        Some(r) => {
            if r.len() != observed.len() {
                return Err(MeasureError::ReferenceMismatch {
                    expected: observed.len(),
                    got: r.len(),
                });
            }
            r.to_vec()
        }
        None => random_walk_reference(observed),
    };
    Ok(observed.iter().zip(&reference).map(|(y, r)| (y - r).abs()).collect())
}

/// Scores `predicted` against `observed` under one measure.
pub fn compute_measure(id: MeasureId, observed: &[f64], predicted: &[f64], opts: &MeasureOptions<'_>) -> Result<f64> {
    check_pair(observed, predicted)?;
    let n = observed.len();
    if n < id.min_len() {
        return Err(MeasureError::TooShort {
            measure: id,
            needed: id.min_len(),
            got: n,
        });
    }
    if id.is_scalar() && n != 1 {
        return Err(MeasureError::ScalarOnly(id));
    }
    let abs_err = || observed.iter().zip(predicted).map(|(y, x)| (y - x).abs());

    let value = match id {
        MeasureId::Mae => mean(abs_err()),
        MeasureId::Rmse => mean(abs_err().map(|e| e * e)).sqrt(),
        MeasureId::Mape | MeasureId::Ape => {
            let terms = ape_terms(id, observed, predicted, opts.epsilon)?;
            mean(terms.into_iter())
        }
        MeasureId::CMape => {
            let policy = match opts.epsilon {
                EpsilonPolicy::Strict => EpsilonPolicy::Corrected(None),
                p => p,
            };
            mean(ape_terms(id, observed, predicted, policy)?.into_iter())
        }
        MeasureId::Smape | MeasureId::Sape => mean(sape_terms(id, observed, predicted)?.into_iter()),
        MeasureId::MdApe | MeasureId::MdsApe => median_measure(id, observed, predicted, opts)?,
        MeasureId::Mare => {
            let rw = rw_errors(observed, opts)?;
            let ratios: Vec<f64> = abs_err()
                .zip(&rw)
                .filter(|(_, &r)| r != 0.0)
                .map(|(e, &r)| e / r)
                .collect();
            if ratios.is_empty() {
                return Err(MeasureError::DivisionByZero { measure: id, index: 0 });
            }
            mean(ratios.into_iter())
        }
        MeasureId::RelMae => {
            let rw: f64 = rw_errors(observed, opts)?.iter().sum();
            if rw == 0.0 {
                return Err(MeasureError::DivisionByZero { measure: id, index: 0 });
            }
            abs_err().sum::<f64>() / rw
        }
        MeasureId::Mase => {
            let scale = observed.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1) as f64;
            if scale == 0.0 {
                return Err(MeasureError::DivisionByZero { measure: id, index: 0 });
            }
            mean(abs_err().map(|e| e / scale))
        }
        MeasureId::Pb => {
            let rw = rw_errors(observed, opts)?;
            mean(abs_err().zip(&rw).map(|(e, &r)| if e <= r { 1.0 } else { 0.0 }))
        }
        MeasureId::Maape => mean(observed.iter().zip(predicted).map(|(&y, &x)| {
            let e = (y - x).abs();
            match (y == 0.0, e == 0.0) {
                (true, true) => 0.0,
                (true, false) => FRAC_PI_2,
                _ => (e / y.abs()).atan(),
            }
        })),
        MeasureId::Nmse => {
            let ybar = mean(observed.iter().copied());
            let var = observed.iter().map(|y| (y - ybar).powi(2)).sum::<f64>() / (n - 1) as f64;
            if var == 0.0 {
                return Err(MeasureError::DivisionByZero { measure: id, index: 0 });
            }
            mean(abs_err().map(|e| e * e)) / var
        }
    };
    Ok(value)
}

/// Median of per-week APE (MdAPE) or symmetric APE (MdsAPE).
pub fn median_measure(id: MeasureId, observed: &[f64], predicted: &[f64], opts: &MeasureOptions<'_>) -> Result<f64> {
    check_pair(observed, predicted)?;
    let terms = match id {
        MeasureId::MdApe => ape_terms(id, observed, predicted, opts.epsilon)?,
        MeasureId::MdsApe => sape_terms(id, observed, predicted)?,
        other => return Err(MeasureError::NotMedian(other)),
    };
    Ok(median(&terms).expect("non-empty"))
}

/// Absolute percentage error of one scalar prediction.
pub fn ape(observed: f64, predicted: f64) -> Result<f64> {
    compute_measure(
        MeasureId::Ape,
        &[observed],
        &[predicted],
        &MeasureOptions {
            epsilon: EpsilonPolicy::Strict,
            rw_reference: None,
        },
    )
}

/// Symmetric absolute percentage error of one scalar prediction.
pub fn sape(observed: f64, predicted: f64) -> Result<f64> {
    compute_measure(MeasureId::Sape, &[observed], &[predicted], &MeasureOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub k: Week,
    pub predicted: f64,
    pub observed: f64,
    /// observed − predicted
    pub error: f64,
}

/// Per-prediction-time errors of one method on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureErrorSeries {
    pub method_id: String,
    pub feature: FeatureId,
    pub observed_value: f64,
    pub points: Vec<FeaturePoint>,
    /// Prediction times whose predicted curve lacks the feature.
    pub gaps: Vec<(Week, String)>,
}

/// Feature vectors of every run's season curve, keyed by prediction time.
pub fn predicted_features(
    set: &ForecastSet,
    cfg: &FeatureConfig,
    season_threshold: Option<f64>,
    mode: EvaluationMode,
) -> Vec<(Week, Result<FeatureVector>)> {
    let target = set.target();
    let ctx = FeatureContext::of(target, season_threshold);
    set.runs()
        .map(|run| {
            let curve = run.season_curve(target, mode);
            let fv = extract_features(&curve, &ctx, cfg).map_err(MeasureError::from);
            (run.prediction_time(), fv)
        })
        .collect()
}

/// Builds a feature error series from precomputed feature vectors.
pub fn feature_errors_from(
    method_id: &str,
    feature: FeatureId,
    observed: &FeatureVector,
    predicted: &[(Week, Result<FeatureVector>)],
    mode: EvaluationMode,
) -> Result<FeatureErrorSeries> {
    let observed_value = feature
        .value(observed)
        .ok_or(MeasureError::ObservedFeatureAbsent(feature))?;
    let cutoff = match mode {
        EvaluationMode::Forecasting => feature.occurrence_week(observed),
        EvaluationMode::Calibration => None,
    };
    let mut out = FeatureErrorSeries {
        method_id: method_id.to_string(),
        feature,
        observed_value,
        points: Vec::new(),
        gaps: Vec::new(),
    };
    for (k, fv) in predicted {
        if cutoff.is_some_and(|w| *k >= w) {
            continue;
        }
        let value = match fv {
            Ok(fv) => feature.value(fv),
            Err(e) => {
                out.gaps.push((*k, e.to_string()));
                continue;
            }
        };
        match value {
            Some(x) => out.points.push(FeaturePoint {
                k: *k,
                predicted: x,
                observed: observed_value,
                error: observed_value - x,
            }),
            None => out.gaps.push((*k, format!("predicted curve has no {feature}"))),
        }
    }
    Ok(out)
}

/// Pairs each run's predicted feature with the observed one.
///
/// Forecasting mode drops prediction times at or after the week the
/// observed feature occurred.
pub fn feature_error_series(
    set: &ForecastSet,
    feature: FeatureId,
    cfg: &FeatureConfig,
    mode: EvaluationMode,
) -> Result<FeatureErrorSeries> {
    let threshold = cfg.season_threshold_percent().transpose()?;
    let observed = extract_features(set.target().counts(), &FeatureContext::of(set.target(), threshold), cfg)?;
    let predicted = predicted_features(set, cfg, threshold, mode);
    feature_errors_from(set.method_id(), feature, &observed, &predicted, mode)
}

/// Scores a feature error series over its prediction times, one value per
/// measure.
pub fn aggregate_feature_errors(
    series: &FeatureErrorSeries,
    measures: &[MeasureId],
    opts: &MeasureOptions<'_>,
) -> Result<BTreeMap<MeasureId, f64>> {
    if series.points.is_empty() {
        return Err(MeasureError::EmptySeries);
    }
    let observed: Vec<f64> = series.points.iter().map(|p| p.observed).collect();
    let predicted: Vec<f64> = series.points.iter().map(|p| p.predicted).collect();
    measures
        .iter()
        .map(|&m| Ok((m, compute_measure(m, &observed, &predicted, opts)?)))
        .collect()
}

/// Curve of first-week predictions `x(k+1)` for `k = t_b..=t_e`.
pub fn one_step_ahead_curve(set: &ForecastSet, t_b: Week, t_e: Week) -> Result<WeeklySeries> {
    if t_b > t_e {
        return Err(MeasureError::InvalidRange(t_b, t_e));
    }
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for k in t_b..=t_e {
        match set.run(k).and_then(|r| r.predicted().get(k + 1)) {
            Some(x) => values.push(x),
            None => missing.push(k),
        }
    }
    if !missing.is_empty() {
        return Err(MeasureError::MissingRun(missing));
    }
    Ok(WeeklySeries::new(t_b + 1, values).expect("finite validated run values"))
}
