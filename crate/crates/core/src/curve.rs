//! Observed curves, forecast runs and stochastic predictions.
//!
//! Weeks are 1-based integers throughout. A [`WeeklySeries`] is a contiguous
//! run of weekly values starting at some week; every curve-shaped thing in the
//! crate (observed seasons, spliced forecast curves, one-step-ahead curves) is
//! stored as one.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based week number.
pub type Week = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("series is empty")]
    Empty,
    #[error("weeks are not contiguous: week {found} follows week {previous}")]
    NonContiguousWeeks { previous: Week, found: Week },
    #[error("negative count {value} at week {week}")]
    NegativeCount { week: Week, value: f64 },
    #[error("non-finite value at week {week}")]
    NonFinite { week: Week },
    #[error("season has {len} week(s), need at least 2")]
    TooShort { len: usize },
    #[error("week numbers are 1-based, got week 0")]
    ZeroWeek,
    #[error("total visits has {visits} entries but the curve has {values}")]
    VisitsLengthMismatch { values: usize, visits: usize },
    #[error("total visits must be positive, got {value} at week {week}")]
    NonPositiveVisits { week: Week, value: f64 },
    #[error("population must be positive")]
    ZeroPopulation,
    #[error("forecast run at k={k} has no predicted weeks")]
    EmptyRun { k: Week },
    #[error("forecast run at k={k}: {reason}")]
    InvalidRun { k: Week, reason: String },
    #[error("forecast set for {method} already holds a run at k={k}")]
    DuplicateRun { method: String, k: Week },
    #[error("run at k={k} predicts no week inside the target season")]
    RunOutsideSeason { k: Week },
    #[error("no week is shared by the observed curve and the run")]
    EmptyOverlap,
    #[error("invalid replicates: {0}")]
    InvalidReplicates(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, CurveError>;

/// Contiguous weekly values beginning at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    start: Week,
    values: Vec<f64>,
}

impl WeeklySeries {
    pub fn new(start: Week, values: Vec<f64>) -> Result<Self> {
        if start == 0 {
            return Err(CurveError::ZeroWeek);
        }
        if values.is_empty() {
            return Err(CurveError::Empty);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(CurveError::NonFinite {
                    week: start + i as Week,
                });
            }
        }
        Ok(Self { start, values })
    }

    /// Builds a series from `(week, value)` pairs, rejecting gaps and
    /// out-of-order weeks. Negative values are accepted here; use
    /// [`validate_curve`] for count data.
    pub fn from_pairs(raw: &[(Week, f64)]) -> Result<Self> {
        let (first, _) = raw.first().ok_or(CurveError::Empty)?;
        let mut previous = None;
        for &(week, _) in raw {
            if let Some(p) = previous {
                if week != p + 1 {
                    return Err(CurveError::NonContiguousWeeks {
                        previous: p,
                        found: week,
                    });
                }
            }
            previous = Some(week);
        }
        Self::new(*first, raw.iter().map(|&(_, v)| v).collect())
    }

    pub fn start(&self) -> Week {
        self.start
    }

    pub fn end(&self) -> Week {
        self.start + self.values.len() as Week - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, week: Week) -> Option<f64> {
        if week < self.start {
            return None;
        }
        self.values.get((week - self.start) as usize).copied()
    }

    pub fn weeks(&self) -> impl Iterator<Item = Week> + '_ {
        (0..self.values.len()).map(move |i| self.start + i as Week)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Week, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start + i as Week, v))
    }

    /// Values for weeks `from..=to`, clipped to the series extent.
    pub fn slice(&self, from: Week, to: Week) -> Option<WeeklySeries> {
        let from = from.max(self.start);
        let to = to.min(self.end());
        if from > to {
            return None;
        }
        let a = (from - self.start) as usize;
        let b = (to - self.start) as usize;
        Some(WeeklySeries {
            start: from,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Same values moved `offset` weeks later.
    pub fn shifted(&self, offset: Week) -> WeeklySeries {
        WeeklySeries {
            start: self.start + offset,
            values: self.values.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> WeeklySeries {
        WeeklySeries {
            start: self.start,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Validates raw `(week, count)` pairs into a count series.
///
/// Rejects gaps, negative counts and single-week input. Data are never
/// reordered.
pub fn validate_curve(raw: &[(Week, f64)]) -> Result<WeeklySeries> {
    if raw.is_empty() {
        return Err(CurveError::Empty);
    }
    if raw[0].0 == 0 {
        return Err(CurveError::ZeroWeek);
    }
    let mut previous: Option<Week> = None;
    for &(week, value) in raw {
        if let Some(p) = previous {
            if week != p + 1 {
                return Err(CurveError::NonContiguousWeeks {
                    previous: p,
                    found: week,
                });
            }
        }
        if !value.is_finite() {
            return Err(CurveError::NonFinite { week });
        }
        if value < 0.0 {
            return Err(CurveError::NegativeCount { week, value });
        }
        previous = Some(week);
    }
    if raw.len() < 2 {
        return Err(CurveError::TooShort { len: raw.len() });
    }
    WeeklySeries::from_pairs(raw)
}

/// One observed season of weekly new-case counts for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiCurve {
    region_id: String,
    season_id: String,
    counts: WeeklySeries,
    total_visits: Option<Vec<f64>>,
    population: Option<u64>,
}

impl EpiCurve {
    pub fn new(region_id: impl Into<String>, season_id: impl Into<String>, raw: &[(Week, f64)]) -> Result<Self> {
        Ok(Self {
            region_id: region_id.into(),
            season_id: season_id.into(),
            counts: validate_curve(raw)?,
            total_visits: None,
            population: None,
        })
    }

    pub fn from_series(
        region_id: impl Into<String>,
        season_id: impl Into<String>,
        counts: WeeklySeries,
    ) -> Result<Self> {
        let raw: Vec<_> = counts.iter().collect();
        Self::new(region_id, season_id, &raw)
    }

    /// Attaches the total patient visits per week, parallel to the counts.
    pub fn with_total_visits(mut self, visits: Vec<f64>) -> Result<Self> {
        if visits.len() != self.counts.len() {
            return Err(CurveError::VisitsLengthMismatch {
                values: self.counts.len(),
                visits: visits.len(),
            });
        }
        for (week, &v) in self.counts.weeks().zip(&visits) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CurveError::NonPositiveVisits { week, value: v });
            }
        }
        self.total_visits = Some(visits);
        Ok(self)
    }

    pub fn with_population(mut self, population: u64) -> Result<Self> {
        if population == 0 {
            return Err(CurveError::ZeroPopulation);
        }
        self.population = Some(population);
        Ok(self)
    }

    pub fn region_id(&self) -> &str {
        &self.region_id
    }

    pub fn season_id(&self) -> &str {
        &self.season_id
    }

    pub fn counts(&self) -> &WeeklySeries {
        &self.counts
    }

    pub fn total_visits(&self) -> Option<&[f64]> {
        self.total_visits.as_deref()
    }

    pub fn population(&self) -> Option<u64> {
        self.population
    }

    /// Season length T.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_week(&self) -> Week {
        self.counts.start()
    }

    pub fn last_week(&self) -> Week {
        self.counts.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// Only weeks after the prediction time are scored.
    Forecasting,
    /// Fitted weeks up to the prediction time are scored too.
    Calibration,
}

impl std::str::FromStr for EvaluationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forecasting" => Ok(Self::Forecasting),
            "calibration" => Ok(Self::Calibration),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// One method's prediction issued at prediction time `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRun {
    method_id: String,
    prediction_time: Week,
    predicted: WeeklySeries,
    fitted: Option<WeeklySeries>,
}

impl ForecastRun {
    /// `predicted[0]` is the forecast for week `k + 1`.
    pub fn new(method_id: impl Into<String>, k: Week, predicted: Vec<f64>) -> Result<Self> {
        if predicted.is_empty() {
            return Err(CurveError::EmptyRun { k });
        }
        check_counts(k, &predicted)?;
        Ok(Self {
            method_id: method_id.into(),
            prediction_time: k,
            predicted: WeeklySeries::new(k + 1, predicted).map_err(|e| CurveError::InvalidRun {
                k,
                reason: e.to_string(),
            })?,
            fitted: None,
        })
    }

    /// Attaches in-sample fitted values; they must end exactly at week `k`.
    pub fn with_fitted(mut self, fitted: WeeklySeries) -> Result<Self> {
        let k = self.prediction_time;
        if fitted.end() != k {
            return Err(CurveError::InvalidRun {
                k,
                reason: format!("fitted values end at week {}, expected {k}", fitted.end()),
            });
        }
        check_counts(k, fitted.values())?;
        self.fitted = Some(fitted);
        Ok(self)
    }

    pub fn method_id(&self) -> &str {
        &self.method_id
    }

    pub fn prediction_time(&self) -> Week {
        self.prediction_time
    }

    pub fn horizon(&self) -> usize {
        self.predicted.len()
    }

    pub fn predicted(&self) -> &WeeklySeries {
        &self.predicted
    }

    pub fn fitted(&self) -> Option<&WeeklySeries> {
        self.fitted.as_ref()
    }

    /// Long-term curve over the whole target season: the model's fitted
    /// values (or, without them, the observed counts) up to `k`, followed by
    /// the predictions clipped at the last observed week.
    pub fn season_curve(&self, observed: &EpiCurve, mode: EvaluationMode) -> WeeklySeries {
        let obs = observed.counts();
        let k = self.prediction_time;
        let mut values = Vec::with_capacity(obs.len());
        for week in obs.weeks() {
            let v = if week <= k {
                let fitted = match mode {
                    EvaluationMode::Calibration => self.fitted.as_ref().and_then(|f| f.get(week)),
                    EvaluationMode::Forecasting => None,
                };
                fitted.or_else(|| obs.get(week))
            } else {
                self.predicted.get(week)
            };
            match v {
                Some(v) => values.push(v),
                None => break,
            }
        }
        WeeklySeries {
            start: obs.start(),
            values,
        }
    }

    fn clipped_to(&self, last_week: Week) -> Option<ForecastRun> {
        let predicted = self.predicted.slice(self.predicted.start(), last_week)?;
        if predicted.start() != self.prediction_time + 1 {
            return None;
        }
        Some(ForecastRun {
            predicted,
            ..self.clone()
        })
    }
}

fn check_counts(k: Week, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(CurveError::InvalidRun {
                k,
                reason: format!("value {v} at position {i} is not a non-negative count"),
            });
        }
    }
    Ok(())
}

/// Observed and predicted values paired week by week.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPairs {
    pub weeks: Vec<Week>,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl AlignedPairs {
    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }
}

/// Pairs a run with the observed curve over its evaluation window.
///
/// Forecasting mode scores only weeks after `k`. Calibration mode also scores
/// the run's fitted weeks; runs without fitted values fall back to the
/// forecasting window.
pub fn align(observed: &EpiCurve, run: &ForecastRun, mode: EvaluationMode) -> Result<AlignedPairs> {
    let obs = observed.counts();
    let mut out = AlignedPairs {
        weeks: Vec::new(),
        observed: Vec::new(),
        predicted: Vec::new(),
    };
    let mut push = |week: Week, x: f64| {
        if let Some(y) = obs.get(week) {
            out.weeks.push(week);
            out.observed.push(y);
            out.predicted.push(x);
        }
    };
    if mode == EvaluationMode::Calibration {
        match run.fitted() {
            Some(fitted) => fitted.iter().for_each(|(w, x)| push(w, x)),
            None => log::warn!(
                "run {} at k={} has no fitted values; calibration falls back to forecasting window",
                run.method_id(),
                run.prediction_time()
            ),
        }
    }
    run.predicted().iter().for_each(|(w, x)| push(w, x));
    if out.is_empty() {
        return Err(CurveError::EmptyOverlap);
    }
    Ok(out)
}

/// All runs of one method against one target season.
#[derive(Debug, Clone)]
pub struct ForecastSet {
    method_id: String,
    runs: BTreeMap<Week, ForecastRun>,
    target: Arc<EpiCurve>,
}

impl ForecastSet {
    pub fn new(method_id: impl Into<String>, target: Arc<EpiCurve>) -> Self {
        Self {
            method_id: method_id.into(),
            runs: BTreeMap::new(),
            target,
        }
    }

    pub fn from_runs(
        method_id: impl Into<String>,
        target: Arc<EpiCurve>,
        runs: impl IntoIterator<Item = ForecastRun>,
    ) -> Result<Self> {
        let mut set = Self::new(method_id, target);
        for run in runs {
            set.insert(run)?;
        }
        Ok(set)
    }

    /// Adds a run, clipping predictions that extend past the season end.
    pub fn insert(&mut self, run: ForecastRun) -> Result<()> {
        let k = run.prediction_time();
        if self.runs.contains_key(&k) {
            return Err(CurveError::DuplicateRun {
                method: self.method_id.clone(),
                k,
            });
        }
        if k < self.target.first_week() {
            return Err(CurveError::RunOutsideSeason { k });
        }
        let run = run
            .clipped_to(self.target.last_week())
            .ok_or(CurveError::RunOutsideSeason { k })?;
        self.runs.insert(k, run);
        Ok(())
    }

    pub fn method_id(&self) -> &str {
        &self.method_id
    }

    pub fn target(&self) -> &EpiCurve {
        &self.target
    }

    pub fn target_arc(&self) -> &Arc<EpiCurve> {
        &self.target
    }

    pub fn runs(&self) -> impl Iterator<Item = &ForecastRun> {
        self.runs.values()
    }

    pub fn run(&self, k: Week) -> Option<&ForecastRun> {
        self.runs.get(&k)
    }

    pub fn prediction_times(&self) -> impl Iterator<Item = Week> + '_ {
        self.runs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// Replicate samples for one week, optionally weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicates {
    samples: Vec<f64>,
    weights: Option<Vec<f64>>,
}

pub(crate) const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_weights(weights: &[f64], n: usize) -> std::result::Result<(), String> {
    if weights.len() != n {
        return Err(format!("{} weights for {n} samples", weights.len()));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err("weights must be positive".into());
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(format!("weights sum to {sum}, expected 1"));
    }
    Ok(())
}

impl Replicates {
    pub fn new(samples: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(CurveError::InvalidReplicates("no samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(CurveError::InvalidReplicates("non-finite sample".into()));
        }
        if let Some(w) = &weights {
            check_weights(w, samples.len()).map_err(CurveError::InvalidReplicates)?;
        }
        Ok(Self { samples, weights })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Sample size at or above which a normal predictive distribution is assumed.
pub const LARGE_SAMPLE_SIZE: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistKind {
    /// A zero standard deviation is a point mass at `mean`.
    Normal {
        mean: f64,
        sd: f64,
    },
    StudentT {
        mean: f64,
        dof: f64,
        scale: f64,
    },
    Empirical {
        samples: Vec<f64>,
        weights: Option<Vec<f64>>,
    },
}

/// Predictive distribution of a single weekly value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    kind: DistKind,
    sample_count: u32,
}

impl DistSpec {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(CurveError::InvalidDistribution(format!(
                "normal needs finite mean and sd >= 0, got ({mean}, {sd})"
            )));
        }
        Ok(Self {
            kind: DistKind::Normal { mean, sd },
            sample_count: LARGE_SAMPLE_SIZE,
        })
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::normal(value, 0.0)
    }

    pub fn student_t(mean: f64, dof: f64, scale: f64) -> Result<Self> {
        if !mean.is_finite() || !(dof >= 1.0) || !(scale > 0.0) || !scale.is_finite() {
            return Err(CurveError::InvalidDistribution(format!(
                "student-t needs dof >= 1 and scale > 0, got dof {dof}, scale {scale}"
            )));
        }
        Ok(Self {
            kind: DistKind::StudentT { mean, dof, scale },
            sample_count: (dof + 1.0) as u32,
        })
    }

    pub fn empirical(samples: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let reps = Replicates::new(samples, weights).map_err(|e| CurveError::InvalidDistribution(e.to_string()))?;
        let n = reps.samples.len() as u32;
        Ok(Self {
            kind: DistKind::Empirical {
                samples: reps.samples,
                weights: reps.weights,
            },
            sample_count: n,
        })
    }

    /// Builds the distribution of an estimate from `n` samples with the given
    /// mean and standard deviation. The estimate's spread is `sd / sqrt(n)`;
    /// a Student-t with `n - 1` degrees of freedom is used below
    /// [`LARGE_SAMPLE_SIZE`] samples.
    pub fn from_sample_stats(mean: f64, sd: f64, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(CurveError::InvalidDistribution("sample count is zero".into()));
        }
        if !(sd >= 0.0) {
            return Err(CurveError::InvalidDistribution(format!("negative sd {sd}")));
        }
        let spread = sd / f64::from(n).sqrt();
        let mut spec = if n >= LARGE_SAMPLE_SIZE || spread == 0.0 {
            Self::normal(mean, spread)?
        } else {
            if n < 2 {
                return Err(CurveError::InvalidDistribution(
                    "a single sample gives no degrees of freedom".into(),
                ));
            }
            Self::student_t(mean, f64::from(n - 1), spread)?
        };
        spec.sample_count = n;
        Ok(spec)
    }

    pub fn kind(&self) -> &DistKind {
        &self.kind
    }

    pub fn sample_count(&self) -> u32 {
        self.sample_count
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            DistKind::Normal { mean, .. } | DistKind::StudentT { mean, .. } => *mean,
            DistKind::Empirical { samples, weights } => match weights {
                Some(w) => samples.iter().zip(w).map(|(s, w)| s * w).sum(),
                None => samples.iter().sum::<f64>() / samples.len() as f64,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeekPrediction {
    Replicates(Replicates),
    Dist(DistSpec),
}

/// Uncertain predictions of one method, keyed by target week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticSeries {
    pub method_id: String,
    /// Prediction time the series was issued at, when known.
    pub prediction_time: Option<Week>,
    pub per_week: BTreeMap<Week, WeekPrediction>,
}

impl StochasticSeries {
    pub fn new(method_id: impl Into<String>, prediction_time: Option<Week>) -> Self {
        Self {
            method_id: method_id.into(),
            prediction_time,
            per_week: BTreeMap::new(),
        }
    }

    /// Per-week distributions; replicate weeks become empirical
    /// distributions.
    pub fn to_dist_specs(&self) -> Result<Vec<(Week, DistSpec)>> {
        self.per_week
            .iter()
            .map(|(&w, p)| {
                let spec = match p {
                    WeekPrediction::Dist(d) => d.clone(),
                    WeekPrediction::Replicates(r) => DistSpec::empirical(r.samples.clone(), r.weights.clone())?,
                };
                Ok((w, spec))
            })
            .collect()
    }
}
