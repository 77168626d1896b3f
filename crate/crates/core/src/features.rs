//! Epidemiologically relevant features of a weekly curve.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{EpiCurve, Week, WeeklySeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series has {len} weeks, slope over {delta_t} weeks needs more")]
    SeriesTooShort { len: usize, delta_t: u32 },
    #[error("peak is at the start week {week}; speed is undefined")]
    DegeneratePeakAtStart { week: Week },
    #[error("week {week} is outside the series")]
    WeekOutOfRange { week: Week },
    #[error("population must be positive")]
    ZeroPopulation,
    #[error("contact count must be positive")]
    ZeroContacts,
    #[error("no population given for group '{0}'")]
    MissingGroupPopulation(String),
    #[error("total visits are missing or not positive")]
    MissingDenominator,
    #[error("no run of two or more non-influenza weeks in any past season")]
    NoNonInfluenzaWeeks,
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("negative input {0}")]
    NegativeInput(f64),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// Default slope window for take-off, in weeks.
pub const DEFAULT_TAKEOFF_DELTA_T: u32 = 2;
/// Default take-off slope threshold, cases/week per week.
pub const DEFAULT_TAKEOFF_THRESHOLD: f64 = 150.0;
/// Fraction of a season's total below which a week counts as non-influenza.
pub const NON_INFLUENZA_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    PeakValue,
    PeakTime,
    TakeoffValue,
    TakeoffTime,
    IdLength,
    IdStart,
    SeasonStart,
    Speed,
    AttackRate,
}

impl FeatureId {
    pub const ALL: [FeatureId; 9] = [
        FeatureId::PeakValue,
        FeatureId::PeakTime,
        FeatureId::TakeoffValue,
        FeatureId::TakeoffTime,
        FeatureId::IdLength,
        FeatureId::IdStart,
        FeatureId::SeasonStart,
        FeatureId::Speed,
        FeatureId::AttackRate,
    ];

    /// The eight features ranked by default.
    pub const DEFAULT: [FeatureId; 8] = [
        FeatureId::PeakValue,
        FeatureId::PeakTime,
        FeatureId::TakeoffValue,
        FeatureId::TakeoffTime,
        FeatureId::IdLength,
        FeatureId::IdStart,
        FeatureId::SeasonStart,
        FeatureId::Speed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::PeakValue => "peak_value",
            FeatureId::PeakTime => "peak_time",
            FeatureId::TakeoffValue => "takeoff_value",
            FeatureId::TakeoffTime => "takeoff_time",
            FeatureId::IdLength => "id_length",
            FeatureId::IdStart => "id_start",
            FeatureId::SeasonStart => "season_start",
            FeatureId::Speed => "speed",
            FeatureId::AttackRate => "attack_rate",
        }
    }

    /// Scalar value of this feature in `fv`, if present.
    pub fn value(self, fv: &FeatureVector) -> Option<f64> {
        match self {
            FeatureId::PeakValue => Some(fv.peak_value),
            FeatureId::PeakTime => Some(f64::from(fv.peak_week)),
            FeatureId::TakeoffValue => fv.takeoff_value,
            FeatureId::TakeoffTime => fv.takeoff_week.map(f64::from),
            FeatureId::IdLength => fv.id_length.map(f64::from),
            FeatureId::IdStart => fv.id_start.map(f64::from),
            FeatureId::SeasonStart => fv.season_start.map(f64::from),
            FeatureId::Speed => fv.speed,
            FeatureId::AttackRate => fv.tar,
        }
    }

    /// Week by which the feature has been observed. Forecasts issued at or
    /// after this week are not scored in forecasting mode. `None` means the
    /// feature is only known at season end.
    pub fn occurrence_week(self, fv: &FeatureVector) -> Option<Week> {
        match self {
            FeatureId::PeakValue | FeatureId::PeakTime | FeatureId::Speed => Some(fv.peak_week),
            FeatureId::TakeoffValue | FeatureId::TakeoffTime => fv.takeoff_week,
            FeatureId::IdStart => fv.id_start,
            FeatureId::IdLength => fv.id_last_week,
            FeatureId::SeasonStart => fv.season_start,
            FeatureId::AttackRate => None,
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        FeatureId::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| format!("unknown feature '{s}'"))
    }
}

/// How the season-start threshold is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonThreshold {
    /// Fixed flu-percentage threshold.
    Percent(f64),
    /// Baseline derived from past seasons (see [`season_baseline`]).
    Baseline(Vec<PastSeason>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub takeoff_delta_t: u32,
    pub takeoff_threshold: f64,
    pub id_threshold: f64,
    pub season_threshold: Option<SeasonThreshold>,
}

impl FeatureConfig {
    /// Default take-off settings. The intensity threshold has no default.
    pub fn new(id_threshold: f64) -> Self {
        Self {
            takeoff_delta_t: DEFAULT_TAKEOFF_DELTA_T,
            takeoff_threshold: DEFAULT_TAKEOFF_THRESHOLD,
            id_threshold,
            season_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.takeoff_delta_t == 0 {
            return Err(FeatureError::InvalidConfig("takeoff_delta_t must be >= 1".into()));
        }
        for (name, v) in [
            ("takeoff_threshold", self.takeoff_threshold),
            ("id_threshold", self.id_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FeatureError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(SeasonThreshold::Percent(p)) = &self.season_threshold {
            if !(*p > 0.0) {
                return Err(FeatureError::InvalidConfig(format!(
                    "season threshold must be > 0, got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Resolves the season-start threshold to a percentage.
    pub fn season_threshold_percent(&self) -> Option<Result<f64>> {
        self.season_threshold.as_ref().map(|t| match t {
            SeasonThreshold::Percent(p) => Ok(*p),
            SeasonThreshold::Baseline(past) => season_baseline(past),
        })
    }
}

/// Extracted feature values of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub peak_value: f64,
    pub peak_week: Week,
    pub takeoff_value: Option<f64>,
    pub takeoff_week: Option<Week>,
    pub id_length: Option<u32>,
    pub id_start: Option<Week>,
    pub id_longest_run: Option<u32>,
    pub id_last_week: Option<Week>,
    pub speed: Option<f64>,
    pub season_start: Option<Week>,
    pub tar: Option<f64>,
    /// Reasons for absent fields.
    pub diagnostics: Vec<(FeatureId, String)>,
}

/// Largest weekly value and the earliest week it occurs.
pub fn peak(series: &WeeklySeries) -> Result<(f64, Week)> {
    let mut best: Option<(f64, Week)> = None;
    for (week, v) in series.iter() {
        match best {
            Some((b, _)) if v <= b => {}
            _ => best = Some((v, week)),
        }
    }
    best.ok_or(FeatureError::EmptySeries)
}

/// Earliest week whose slope `(x(t+dt) - x(t)) / dt` reaches the threshold.
pub fn first_take_off(series: &WeeklySeries, delta_t: u32, threshold: f64) -> Result<Option<(f64, Week)>> {
    if delta_t == 0 {
        return Err(FeatureError::InvalidConfig("delta_t must be >= 1".into()));
    }
    let xs = series.values();
    let dt = delta_t as usize;
    if xs.len() <= dt {
        return Err(FeatureError::SeriesTooShort { len: xs.len(), delta_t });
    }
    Ok(xs
        .windows(dt + 1)
        .enumerate()
        .map(|(i, w)| ((w[dt] - w[0]) / f64::from(delta_t), series.start() + i as Week))
        .find(|&(slope, _)| slope >= threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntensityDuration {
    /// Total weeks above the threshold.
    pub length: u32,
    pub start: Week,
    pub longest_run: u32,
    pub last_week: Week,
}

/// Weeks with counts strictly above `threshold`.
pub fn intensity_duration(series: &WeeklySeries, threshold: f64) -> Result<Option<IntensityDuration>> {
    if series.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    if !(threshold > 0.0) {
        return Err(FeatureError::InvalidThreshold(threshold));
    }
    let mut out: Option<IntensityDuration> = None;
    let mut run = 0u32;
    for (week, v) in series.iter() {
        if v > threshold {
            run += 1;
            let id = out.get_or_insert(IntensityDuration {
                length: 0,
                start: week,
                longest_run: 0,
                last_week: week,
            });
            id.length += 1;
            id.longest_run = id.longest_run.max(run);
            id.last_week = week;
        } else {
            run = 0;
        }
    }
    Ok(out)
}

/// Slope of the line from `start_week` to the peak.
pub fn speed_of_epidemic(series: &WeeklySeries, start_week: Week) -> Result<f64> {
    let (peak_value, peak_week) = peak(series)?;
    let start_value = series
        .get(start_week)
        .ok_or(FeatureError::WeekOutOfRange { week: start_week })?;
    if peak_week == start_week {
        return Err(FeatureError::DegeneratePeakAtStart { week: peak_week });
    }
    Ok((peak_value - start_value) / (f64::from(peak_week) - f64::from(start_week)))
}

pub fn total_attack_rate(total_infected: f64, population: f64) -> Result<f64> {
    if !(population > 0.0) {
        return Err(FeatureError::ZeroPopulation);
    }
    if total_infected < 0.0 {
        return Err(FeatureError::NegativeInput(total_infected));
    }
    Ok(total_infected / population)
}

/// Attack rate within each sub-population.
pub fn age_attack_rate(
    counts: &BTreeMap<String, f64>,
    populations: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    counts
        .iter()
        .map(|(group, &n)| {
            let pop = populations
                .get(group)
                .ok_or_else(|| FeatureError::MissingGroupPopulation(group.clone()))?;
            Ok((group.clone(), total_attack_rate(n, *pop)?))
        })
        .collect()
}

pub fn secondary_attack_rate(second_generation: f64, contacts: f64) -> Result<f64> {
    if !(contacts > 0.0) {
        return Err(FeatureError::ZeroContacts);
    }
    if second_generation < 0.0 {
        return Err(FeatureError::NegativeInput(second_generation));
    }
    Ok(second_generation / contacts)
}

/// Weekly ILI share of all visits, in percent.
pub fn flu_percentage(curve: &EpiCurve) -> Result<WeeklySeries> {
    let visits = curve.total_visits().ok_or(FeatureError::MissingDenominator)?;
    flu_percentage_with(curve.counts(), curve.first_week(), visits)
}

/// Flu percentage of `counts` against visits recorded from `visits_start`.
/// Predicted curves reuse the observed denominators this way.
pub fn flu_percentage_with(counts: &WeeklySeries, visits_start: Week, visits: &[f64]) -> Result<WeeklySeries> {
    let values = counts
        .iter()
        .map(|(week, n)| {
            let idx = week.checked_sub(visits_start).ok_or(FeatureError::MissingDenominator)?;
            match visits.get(idx as usize) {
                Some(&v) if v > 0.0 => Ok(100.0 * n / v),
                _ => Err(FeatureError::MissingDenominator),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeeklySeries::new(counts.start(), values).expect("derived from a valid series"))
}

/// Weekly ILI counts and flu percentages of one past season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PastSeason {
    pub counts: Vec<f64>,
    pub percent: Vec<f64>,
}

/// Mean flu percentage over non-influenza weeks of past seasons plus two
/// standard deviations.
///
/// A non-influenza week belongs to a run of two or more consecutive weeks
/// each holding less than 2% of its season's total count. Percentages are
/// pooled across seasons before taking the (sample) standard deviation.
pub fn season_baseline(past: &[PastSeason]) -> Result<f64> {
    let mut pooled = Vec::new();
    for season in past {
        if season.counts.len() != season.percent.len() {
            return Err(FeatureError::InvalidConfig(
                "past season counts and percentages differ in length".into(),
            ));
        }
        let total: f64 = season.counts.iter().sum();
        let cutoff = NON_INFLUENZA_FRACTION * total;
        let low: Vec<bool> = season.counts.iter().map(|&c| c < cutoff).collect();
        let mut i = 0;
        while i < low.len() {
            if !low[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < low.len() && low[i] {
                i += 1;
            }
            if i - start >= 2 {
                pooled.extend_from_slice(&season.percent[start..i]);
            }
        }
    }
    if pooled.is_empty() {
        return Err(FeatureError::NoNonInfluenzaWeeks);
    }
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let var = pooled.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(mean + 2.0 * var.sqrt())
}

/// Earliest week with flu percentage strictly above `threshold`.
pub fn season_start(percent: &WeeklySeries, threshold: f64) -> Option<Week> {
    percent.iter().find(|&(_, p)| p > threshold).map(|(w, _)| w)
}

/// Auxiliary data used by features beyond the counts themselves.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureContext<'a> {
    /// Total visits and the week they start at.
    pub visits: Option<(Week, &'a [f64])>,
    pub population: Option<u64>,
    /// Resolved season-start threshold in percent.
    pub season_threshold: Option<f64>,
}

impl<'a> FeatureContext<'a> {
    pub fn of(curve: &'a EpiCurve, season_threshold: Option<f64>) -> Self {
        Self {
            visits: curve.total_visits().map(|v| (curve.first_week(), v)),
            population: curve.population(),
            season_threshold,
        }
    }
}

/// Every feature computable from `curve`; failures become absences with a
/// diagnostic.
pub fn extract_all(curve: &EpiCurve, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let threshold = match cfg.season_threshold_percent() {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => {
            let mut fv = extract_features(curve.counts(), &FeatureContext::of(curve, None), cfg)?;
            fv.diagnostics.push((FeatureId::SeasonStart, e.to_string()));
            return Ok(fv);
        }
        None => None,
    };
    extract_features(curve.counts(), &FeatureContext::of(curve, threshold), cfg)
}

/// Feature extraction for any weekly series. Only an empty series is an
/// error.
pub fn extract_features(series: &WeeklySeries, ctx: &FeatureContext<'_>, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let (peak_value, peak_week) = peak(series)?;
    let mut fv = FeatureVector {
        peak_value,
        peak_week,
        takeoff_value: None,
        takeoff_week: None,
        id_length: None,
        id_start: None,
        id_longest_run: None,
        id_last_week: None,
        speed: None,
        season_start: None,
        tar: None,
        diagnostics: Vec::new(),
    };
    match first_take_off(series, cfg.takeoff_delta_t, cfg.takeoff_threshold) {
        Ok(Some((slope, week))) => {
            fv.takeoff_value = Some(slope);
            fv.takeoff_week = Some(week);
        }
        Ok(None) => fv
            .diagnostics
            .push((FeatureId::TakeoffValue, "slope never reaches threshold".into())),
        Err(e) => fv.diagnostics.push((FeatureId::TakeoffValue, e.to_string())),
    }

    match intensity_duration(series, cfg.id_threshold) {
        Ok(Some(id)) => {
            fv.id_length = Some(id.length);
            fv.id_start = Some(id.start);
            fv.id_longest_run = Some(id.longest_run);
            fv.id_last_week = Some(id.last_week);
        }
        Ok(None) => fv
            .diagnostics
            .push((FeatureId::IdLength, "no week above threshold".into())),
        Err(e) => fv.diagnostics.push((FeatureId::IdLength, e.to_string())),
    }

    match speed_of_epidemic(series, series.start()) {
        Ok(s) => fv.speed = Some(s),
        Err(e) => fv.diagnostics.push((FeatureId::Speed, e.to_string())),
    }

    match (ctx.visits, ctx.season_threshold) {
        (Some((start, visits)), Some(threshold)) => match flu_percentage_with(series, start, visits) {
            Ok(pct) => match season_start(&pct, threshold) {
                Some(w) => fv.season_start = Some(w),
                None => fv
                    .diagnostics
                    .push((FeatureId::SeasonStart, "flu percentage never exceeds threshold".into())),
            },
            Err(e) => fv.diagnostics.push((FeatureId::SeasonStart, e.to_string())),
        },
        (None, _) => fv
            .diagnostics
            .push((FeatureId::SeasonStart, FeatureError::MissingDenominator.to_string())),
        (_, None) => fv
            .diagnostics
            .push((FeatureId::SeasonStart, "no season threshold configured".into())),
    }

    match ctx.population {
        Some(pop) => match total_attack_rate(series.values().iter().sum(), pop as f64) {
            Ok(t) => fv.tar = Some(t),
            Err(e) => fv.diagnostics.push((FeatureId::AttackRate, e.to_string())),
        },
        None => fv
            .diagnostics
            .push((FeatureId::AttackRate, "population unknown".into())),
    }
    Ok(fv)
}
