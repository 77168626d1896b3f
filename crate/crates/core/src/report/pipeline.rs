use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ingest::{ingest_forecasts, ingest_observed, IngestedForecast};
use super::{ReportError, Result};
use crate::curve::{EpiCurve, EvaluationMode, ForecastSet, StochasticSeries, Week};
use crate::features::{extract_features, FeatureConfig, FeatureContext, FeatureId};
use crate::harness::{generate_curve, generate_forecast_family};
use crate::measures::{
    aggregate_feature_errors, compute_measure, feature_errors_from, one_step_ahead_curve, predicted_features,
    MeasureId, MeasureOptions,
};
use crate::ranking::{
    consensus_over_features, consensus_over_regions, horizon_ranking, ConsensusTable, ErrorMatrix, HorizonRanking,
    MapeGroup, RankMatrix,
};
use crate::stochastic::{measures_vs_point, sub_seed, SamplingOptions, StochasticScores};

/// Everything the per-region evaluation needs besides the data.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub features: Vec<FeatureId>,
    pub measures: Vec<MeasureId>,
    pub feature_config: FeatureConfig,
    pub mode: EvaluationMode,
    pub sampling: Option<SamplingOptions>,
}

impl EvalSettings {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            features: cfg.feature_ids()?,
            measures: cfg.measures()?,
            feature_config: cfg.feature_config(),
            mode: cfg.evaluation.mode,
            sampling: cfg.sampling(),
        })
    }
}

/// Ranking of all methods on one feature in one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub feature: FeatureId,
    pub observed_value: f64,
    pub errors: ErrorMatrix,
    pub ranks: RankMatrix,
    pub horizon: Option<HorizonRanking>,
    /// `(method, k, reason)` for prediction times lacking the feature.
    pub gaps: Vec<(String, Week, String)>,
}

/// First-week predictions of one method and their MAPE band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepReport {
    pub method_id: String,
    pub start: Week,
    pub values: Vec<f64>,
    pub mape: f64,
    pub group: MapeGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub region_id: String,
    pub season_id: String,
    pub methods: Vec<String>,
    pub observed_start: Week,
    pub observed: Vec<f64>,
    pub features: Vec<FeatureReport>,
    /// Features left out of the ranking, with the reason.
    pub skipped: Vec<(FeatureId, String)>,
    /// Methods × ranked features, each cell a consensus over measures.
    pub consensus: ConsensusTable,
    /// Average of `consensus` across features.
    pub consensus_mean: Vec<f64>,
    /// Median of `consensus` across features.
    pub consensus_median: Vec<f64>,
    pub one_step: Vec<OneStepReport>,
    pub notes: Vec<String>,
}

/// Consensus across regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    /// Methods × regions table of per-region average consensus.
    pub table: ConsensusTable,
    pub average: Vec<f64>,
}

/// Bootstrap scores of one stochastic forecast. The values are Monte-Carlo
/// expectations of each measure's per-sample term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticReport {
    pub region_id: String,
    pub method_id: String,
    pub prediction_time: Option<Week>,
    pub estimator: String,
    pub scores: StochasticScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFailure {
    pub region_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub mode: EvaluationMode,
    pub features: Vec<FeatureId>,
    pub measures: Vec<MeasureId>,
    pub regions: Vec<RegionReport>,
    pub overall: Option<Overall>,
    pub stochastic: Vec<StochasticReport>,
    pub failures: Vec<RegionFailure>,
}

impl ReportBundle {
    pub fn is_empty(&self) -> bool {
        self.regions.is_empty() && self.stochastic.is_empty()
    }
}

/// Measures that are defined on a single prediction.
fn pointwise(measures: &[MeasureId]) -> Vec<MeasureId> {
    measures
        .iter()
        .copied()
        .filter(|m| {
            !matches!(
                m,
                MeasureId::Mase | MeasureId::Nmse | MeasureId::Mare | MeasureId::RelMae | MeasureId::Pb
            )
        })
        .collect()
}

/// Ranks every method of one region on every configured feature.
pub fn evaluate_region(target: &Arc<EpiCurve>, sets: &[ForecastSet], settings: &EvalSettings) -> Result<RegionReport> {
    let region_err = |message: String| ReportError::Region {
        region: target.region_id().to_string(),
        message,
    };
    if sets.is_empty() {
        return Err(region_err("no deterministic forecasts".into()));
    }
    if settings.measures.is_empty() || settings.features.is_empty() {
        return Err(ReportError::Config(
            "at least one feature and one measure are required".into(),
        ));
    }
    let cfg = &settings.feature_config;
    let threshold = cfg
        .season_threshold_percent()
        .transpose()
        .map_err(|e| region_err(e.to_string()))?;
    let observed_fv = extract_features(target.counts(), &FeatureContext::of(target, threshold), cfg)
        .map_err(|e| region_err(e.to_string()))?;
    let methods: Vec<String> = sets.iter().map(|s| s.method_id().to_string()).collect();
    let predicted: Vec<_> = sets
        .iter()
        .map(|s| predicted_features(s, cfg, threshold, settings.mode))
        .collect();
    let opts = MeasureOptions::default();
    let horizon_measures = pointwise(&settings.measures);

    let mut features = Vec::new();
    let mut skipped = Vec::new();
    let mut notes = Vec::new();
    'feature: for &feature in &settings.features {
        let mut series = Vec::with_capacity(sets.len());
        for (set, pred) in sets.iter().zip(&predicted) {
            match feature_errors_from(set.method_id(), feature, &observed_fv, pred, settings.mode) {
                Ok(s) if s.points.is_empty() => {
                    skipped.push((feature, format!("{} has no usable prediction time", set.method_id())));
                    continue 'feature;
                }
                Ok(s) => series.push(s),
                Err(e) => {
                    skipped.push((feature, e.to_string()));
                    continue 'feature;
                }
            }
        }
        let mut cells = Vec::with_capacity(series.len());
        for s in &series {
            match aggregate_feature_errors(s, &settings.measures, &opts) {
                Ok(m) => cells.push(settings.measures.iter().map(|id| m[id]).collect::<Vec<_>>()),
                Err(e) => {
                    skipped.push((feature, format!("{}: {e}", s.method_id)));
                    continue 'feature;
                }
            }
        }
        let errors = ErrorMatrix::new(methods.clone(), settings.measures.clone(), cells)?;
        let ranks = RankMatrix::from_errors(&errors)?;
        let horizon = if horizon_measures.is_empty() {
            None
        } else {
            match horizon_ranking(&series, &horizon_measures) {
                Ok(h) => Some(h),
                Err(e) => {
                    notes.push(format!("{feature}: no horizon ranking ({e})"));
                    None
                }
            }
        };
        let gaps = series
            .iter()
            .flat_map(|s| s.gaps.iter().map(|(k, r)| (s.method_id.clone(), *k, r.clone())))
            .collect();
        features.push(FeatureReport {
            feature,
            observed_value: series[0].observed_value,
            errors,
            ranks,
            horizon,
            gaps,
        });
    }
    if features.is_empty() {
        let reasons: Vec<String> = skipped.iter().map(|(f, r)| format!("{f}: {r}")).collect();
        return Err(region_err(format!(
            "no feature could be ranked ({})",
            reasons.join("; ")
        )));
    }

    let columns = features.iter().map(|f| f.feature.name().to_string()).collect();
    let cells = (0..methods.len())
        .map(|i| features.iter().map(|f| f.ranks.consensus[i]).collect())
        .collect();
    let consensus = ConsensusTable::new(methods.clone(), columns, cells)?;
    let scores = consensus_over_features(&consensus)?;

    let (t_b, t_e) = (target.first_week() + 1, target.last_week() - 1);
    let mut one_step = Vec::new();
    for set in sets {
        let curve = match one_step_ahead_curve(set, t_b, t_e) {
            Ok(c) => c,
            Err(e) => {
                notes.push(format!("{}: no one-step-ahead curve ({e})", set.method_id()));
                continue;
            }
        };
        let observed: Vec<f64> = curve
            .weeks()
            .map(|w| target.counts().get(w).expect("inside season"))
            .collect();
        match compute_measure(MeasureId::Mape, &observed, curve.values(), &opts) {
            Ok(mape) => one_step.push(OneStepReport {
                method_id: set.method_id().to_string(),
                start: curve.start(),
                values: curve.values().to_vec(),
                mape,
                group: MapeGroup::of(mape).expect("MAPE is non-negative"),
            }),
            Err(e) => notes.push(format!("{}: one-step MAPE undefined ({e})", set.method_id())),
        }
    }

    Ok(RegionReport {
        region_id: target.region_id().to_string(),
        season_id: target.season_id().to_string(),
        methods,
        observed_start: target.first_week(),
        observed: target.counts().values().to_vec(),
        features,
        skipped,
        consensus,
        consensus_mean: scores.iter().map(|s| s.mean).collect(),
        consensus_median: scores.iter().map(|s| s.median).collect(),
        one_step,
        notes,
    })
}

/// Data ready for evaluation.
#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub regions: Vec<(Arc<EpiCurve>, Vec<ForecastSet>)>,
    pub stochastic: Vec<(Arc<EpiCurve>, StochasticSeries)>,
    pub failures: Vec<RegionFailure>,
}

impl PipelineInputs {
    /// Matches ingested forecasts to their observed curves.
    pub fn assemble(
        curves: Vec<EpiCurve>,
        forecasts: Vec<IngestedForecast>,
        regions: &[String],
        season: Option<&str>,
    ) -> Self {
        let mut out = PipelineInputs::default();
        let mut by_region: BTreeMap<String, Vec<EpiCurve>> = BTreeMap::new();
        for c in curves {
            if season.is_none_or(|s| c.season_id() == s) {
                by_region.entry(c.region_id().to_string()).or_default().push(c);
            }
        }
        let wanted: Vec<String> = if regions.is_empty() {
            by_region.keys().cloned().collect()
        } else {
            regions.to_vec()
        };
        let mut targets: BTreeMap<String, Arc<EpiCurve>> = BTreeMap::new();
        for r in &wanted {
            match by_region.remove(r) {
                Some(mut cs) if cs.len() == 1 => {
                    targets.insert(r.clone(), Arc::new(cs.pop().expect("one curve")));
                }
                Some(_) => out.failures.push(RegionFailure {
                    region_id: r.clone(),
                    message: "several seasons observed; select one with evaluation.season".into(),
                }),
                None => out.failures.push(RegionFailure {
                    region_id: r.clone(),
                    message: "no observed curve".into(),
                }),
            }
        }

        let mut sets: BTreeMap<String, std::result::Result<Vec<ForecastSet>, String>> = BTreeMap::new();
        for f in forecasts {
            let Some(target) = targets.get(f.region_id()) else {
                continue;
            };
            match f {
                IngestedForecast::Deterministic(d) => {
                    let entry = sets.entry(d.region_id.clone()).or_insert_with(|| Ok(Vec::new()));
                    if let Ok(list) = entry {
                        match ForecastSet::from_runs(&d.method_id, Arc::clone(target), d.runs) {
                            Ok(s) => list.push(s),
                            Err(e) => *entry = Err(format!("{}: {e}", d.method_id)),
                        }
                    }
                }
                IngestedForecast::Stochastic { series, .. } => {
                    out.stochastic.push((Arc::clone(target), series));
                }
            }
        }
        let stochastic_regions: Vec<&str> = out.stochastic.iter().map(|(t, _)| t.region_id()).collect();
        for (region, target) in targets {
            match sets.remove(&region) {
                Some(Ok(list)) => out.regions.push((target, list)),
                Some(Err(message)) => out.failures.push(RegionFailure {
                    region_id: region,
                    message,
                }),
                None if stochastic_regions.contains(&region.as_str()) => {}
                None => out.failures.push(RegionFailure {
                    region_id: region,
                    message: "no forecasts".into(),
                }),
            }
        }
        out
    }

    /// Generated truth and forecast families.
    pub fn synthetic(section: &super::config::SyntheticSection, regions: &[String]) -> Result<Self> {
        let mut out = PipelineInputs::default();
        for synth in &section.regions {
            if !regions.is_empty() && !regions.contains(&synth.region_id) {
                continue;
            }
            let truth = Arc::new(generate_curve(synth)?);
            let k_start = section.k_start.unwrap_or(truth.first_week() + 1);
            let k_end = section.k_end.unwrap_or(truth.last_week() - 1);
            let sets = generate_forecast_family(&truth, &section.methods, k_start..=k_end)?;
            out.regions.push((truth, sets));
        }
        Ok(out)
    }
}

/// Evaluates prepared inputs; regions run in parallel and fail
/// independently.
pub fn run_with_inputs(inputs: PipelineInputs, settings: &EvalSettings) -> Result<ReportBundle> {
    if settings.measures.is_empty() || settings.features.is_empty() {
        return Err(ReportError::Config(
            "at least one feature and one measure are required".into(),
        ));
    }
    let results: Vec<_> = inputs
        .regions
        .par_iter()
        .map(|(target, sets)| evaluate_region(target, sets, settings).map_err(|e| (target.region_id(), e)))
        .collect();
    let mut failures = inputs.failures;
    let mut regions = Vec::new();
    for r in results {
        match r {
            Ok(report) => regions.push(report),
            Err((region, e)) => {
                log::error!("region {region}: {e}");
                failures.push(RegionFailure {
                    region_id: region.to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    failures.sort_by(|a, b| a.region_id.cmp(&b.region_id));

    let stochastic = if inputs.stochastic.is_empty() {
        Vec::new()
    } else {
        let sampling = settings
            .sampling
            .ok_or_else(|| ReportError::Config("stochastic forecasts need stochastic.seed".into()))?;
        let scored: Vec<_> = inputs
            .stochastic
            .par_iter()
            .enumerate()
            .map(|(i, (target, series))| score_stochastic(target, series, sampling, i as u64))
            .collect();
        let mut out = Vec::new();
        for (r, (target, series)) in scored.into_iter().zip(&inputs.stochastic) {
            match r {
                Ok(s) => out.push(s),
                Err(e) => failures.push(RegionFailure {
                    region_id: target.region_id().to_string(),
                    message: format!("{}: {e}", series.method_id),
                }),
            }
        }
        out
    };

    Ok(ReportBundle {
        mode: settings.mode,
        features: settings.features.clone(),
        measures: settings.measures.clone(),
        overall: overall(&regions)?,
        regions,
        stochastic,
        failures,
    })
}

fn score_stochastic(
    target: &EpiCurve,
    series: &StochasticSeries,
    sampling: SamplingOptions,
    index: u64,
) -> Result<StochasticReport> {
    let specs = series.to_dist_specs()?;
    let mut weeks = Vec::with_capacity(specs.len());
    let mut observed = Vec::with_capacity(specs.len());
    let mut dists = Vec::with_capacity(specs.len());
    for (w, spec) in specs {
        let y = target.counts().get(w).ok_or_else(|| ReportError::Region {
            region: target.region_id().to_string(),
            message: format!("{}: week {w} is outside the observed season", series.method_id),
        })?;
        weeks.push(w);
        observed.push(y);
        dists.push(spec);
    }
    let opts = SamplingOptions {
        seed: sub_seed(sampling.seed, u64::from(series.prediction_time.unwrap_or(0)), index),
        ..sampling
    };
    Ok(StochasticReport {
        region_id: target.region_id().to_string(),
        method_id: series.method_id.clone(),
        prediction_time: series.prediction_time,
        estimator: "monte-carlo expectation over bootstrap samples".into(),
        scores: measures_vs_point(&weeks, &dists, &observed, &opts)?,
    })
}

/// Methods ranked in every region, compared across regions.
fn overall(regions: &[RegionReport]) -> Result<Option<Overall>> {
    let Some(first) = regions.first() else {
        return Ok(None);
    };
    let methods: Vec<String> = first
        .methods
        .iter()
        .filter(|m| regions.iter().all(|r| r.methods.contains(m)))
        .cloned()
        .collect();
    if methods.is_empty() {
        return Ok(None);
    }
    let cells = methods
        .iter()
        .map(|m| {
            regions
                .iter()
                .map(|r| {
                    let i = r.methods.iter().position(|x| x == m).expect("common method");
                    r.consensus_mean[i]
                })
                .collect()
        })
        .collect();
    let columns = regions.iter().map(|r| r.region_id.clone()).collect();
    let table = ConsensusTable::new(methods, columns, cells)?;
    let average = consensus_over_regions(&table)?;
    Ok(Some(Overall { table, average }))
}

/// Loads the configured inputs and evaluates them.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let settings = EvalSettings::from_config(cfg)?;
    let regions = &cfg.evaluation.regions;
    let inputs = match (&cfg.input, &cfg.synthetic) {
        (Some(input), _) => {
            let curves = ingest_observed(&input.observed)?;
            let forecasts = ingest_forecasts(&input.forecasts)?;
            PipelineInputs::assemble(curves, forecasts, regions, cfg.evaluation.season.as_deref())
        }
        (None, Some(synth)) => PipelineInputs::synthetic(synth, regions)?,
        (None, None) => return Err(ReportError::Config("no input configured".into())),
    };
    run_with_inputs(inputs, &settings)
}
