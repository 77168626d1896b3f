//! Evaluation of stochastic forecasts.
//!
//! Three routes are provided:
//!
//! - replicate forecasts are scored week by week across their series, with
//!   optional series weights ([`replicate_measure`], [`cumulative_relative`]);
//! - forecasts given as predictive distributions are bootstrapped and scored
//!   against a deterministic observation ([`measures_vs_point`]) or against
//!   an uncertain one ([`measures_between_pdfs`]);
//! - predictive and observed densities are compared directly
//!   ([`pdf_distance`]).
//!
//! The bootstrap scores are Monte-Carlo expectations of each measure's
//! per-pair kernel (medians for the Md- variants). Every week draws from its
//! own sub-seed derived from the run seed and the week index, so the result
//! does not depend on evaluation order or thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{check_weights, DistKind, DistSpec, Week};
use crate::measures::{EpsilonPolicy, MeasureId};
use crate::stats::{median, weighted_median};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("replicate row is empty")]
    EmptyReplicates,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("random-walk error is zero")]
    ZeroRwError,
    #[error("random-walk cumulative error is zero")]
    ZeroRwCumulative,
    #[error("{measure}: division by zero in week {week}")]
    DivisionByZero { measure: MeasureId, week: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),
    #[error("sample size {0} is below the minimum of {MIN_SAMPLE_SIZE}")]
    SampleSizeTooSmall(usize),
    #[error("closed form needs two non-degenerate normal distributions")]
    ClosedFormUnavailable,
    #[error("density cannot be evaluated pointwise for this distribution")]
    DensityUnavailable,
    #[error("both densities vanish on every sample")]
    ZeroDenominator,
    #[error("replicate matrix is not rectangular")]
    Ragged,
}

pub type Result<T> = std::result::Result<T, StochasticError>;

/// Default bootstrap sample size per week.
pub const DEFAULT_SAMPLE_SIZE: usize = 10_000;
/// Smallest accepted bootstrap sample size.
pub const MIN_SAMPLE_SIZE: usize = 1_000;

/// Per-week measures aggregated across replicate series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReplicateMeasure {
    #[serde(rename = "MAPE_t")]
    Mape,
    #[serde(rename = "sMAPE_t")]
    Smape,
    #[serde(rename = "MdAPE_t")]
    MdApe,
    #[serde(rename = "GMRAE_t")]
    Gmrae,
    #[serde(rename = "MdRAE_t")]
    MdRae,
    #[serde(rename = "RMSE_t")]
    Rmse,
    #[serde(rename = "PB_t")]
    Pb,
}

impl ReplicateMeasure {
    pub const ALL: [ReplicateMeasure; 7] = [
        ReplicateMeasure::Mape,
        ReplicateMeasure::Smape,
        ReplicateMeasure::MdApe,
        ReplicateMeasure::Gmrae,
        ReplicateMeasure::MdRae,
        ReplicateMeasure::Rmse,
        ReplicateMeasure::Pb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReplicateMeasure::Mape => "MAPE_t",
            ReplicateMeasure::Smape => "sMAPE_t",
            ReplicateMeasure::MdApe => "MdAPE_t",
            ReplicateMeasure::Gmrae => "GMRAE_t",
            ReplicateMeasure::MdRae => "MdRAE_t",
            ReplicateMeasure::Rmse => "RMSE_t",
            ReplicateMeasure::Pb => "PB_t",
        }
    }

    fn needs_rw(self) -> bool {
        matches!(
            self,
            ReplicateMeasure::Gmrae | ReplicateMeasure::MdRae | ReplicateMeasure::Pb
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateValue {
    pub value: f64,
    /// Set when a geometric mean collapsed to zero because one term was zero.
    pub degenerate_zero: bool,
}

impl ReplicateValue {
    fn plain(value: f64) -> Self {
        Self {
            value,
            degenerate_zero: false,
        }
    }
}

/// Aggregation across replicates; equal weights take the unweighted path so
/// that both forms agree bit for bit.
struct Agg<'a> {
    weights: Option<&'a [f64]>,
}

impl Agg<'_> {
    fn uniform(&self) -> bool {
        self.weights.is_none_or(|w| w.iter().all(|&x| x == w[0]))
    }

    fn mean(&self, xs: &[f64]) -> f64 {
        match self.weights {
            Some(w) if !self.uniform() => xs.iter().zip(w).map(|(x, w)| x * w).sum(),
            _ => xs.iter().sum::<f64>() / xs.len() as f64,
        }
    }

    fn median(&self, xs: &[f64]) -> f64 {
        match self.weights {
            Some(w) if !self.uniform() => weighted_median(xs, w).expect("non-empty"),
            _ => median(xs).expect("non-empty"),
        }
    }

    fn geometric(&self, xs: &[f64]) -> ReplicateValue {
        if xs.contains(&0.0) {
            log::warn!("geometric mean of relative errors collapsed to zero");
            return ReplicateValue {
                value: 0.0,
                degenerate_zero: true,
            };
        }
        let log_mean = match self.weights {
            Some(w) if !self.uniform() => xs.iter().zip(w).map(|(x, w)| w * x.ln()).sum::<f64>(),
            _ => xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64,
        };
        ReplicateValue::plain(log_mean.exp())
    }
}

/// Scores one week's replicates `row` against the observed value.
///
/// `rw_error` is the absolute error of the random-walk forecast for the
/// week; it is required by GMRAE, MdRAE and PB.
pub fn replicate_measure(
    id: ReplicateMeasure,
    observed: f64,
    row: &[f64],
    rw_error: Option<f64>,
    weights: Option<&[f64]>,
) -> Result<ReplicateValue> {
    if row.is_empty() {
        return Err(StochasticError::EmptyReplicates);
    }
    if let Some(w) = weights {
        check_weights(w, row.len()).map_err(StochasticError::InvalidWeights)?;
    }
    let agg = Agg { weights };
    let abs_err: Vec<f64> = row.iter().map(|x| (observed - x).abs()).collect();
    let rw = if id.needs_rw() {
        let rw = rw_error.ok_or(StochasticError::ZeroRwError)?.abs();
        if rw == 0.0 && id != ReplicateMeasure::Pb {
            return Err(StochasticError::ZeroRwError);
        }
        rw
    } else {
        0.0
    };
    let ape = || -> Result<Vec<f64>> {
        if observed == 0.0 {
            return Err(StochasticError::DivisionByZero {
                measure: MeasureId::Mape,
                week: 0,
            });
        }
        Ok(abs_err.iter().map(|e| e / observed.abs()).collect())
    };
    Ok(match id {
        ReplicateMeasure::Mape => ReplicateValue::plain(agg.mean(&ape()?)),
        ReplicateMeasure::MdApe => ReplicateValue::plain(agg.median(&ape()?)),
        ReplicateMeasure::Smape => {
            let terms = row
                .iter()
                .zip(&abs_err)
                .map(|(x, e)| {
                    let d = observed.abs() + x.abs();
                    if d == 0.0 {
                        Err(StochasticError::DivisionByZero {
                            measure: MeasureId::Smape,
                            week: 0,
                        })
                    } else {
                        Ok(2.0 * e / d)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            ReplicateValue::plain(agg.mean(&terms))
        }
        ReplicateMeasure::Rmse => {
            let sq: Vec<f64> = abs_err.iter().map(|e| e * e).collect();
            ReplicateValue::plain(agg.mean(&sq).sqrt())
        }
        ReplicateMeasure::Gmrae => {
            let rae: Vec<f64> = abs_err.iter().map(|e| e / rw).collect();
            agg.geometric(&rae)
        }
        ReplicateMeasure::MdRae => {
            let rae: Vec<f64> = abs_err.iter().map(|e| e / rw).collect();
            ReplicateValue::plain(agg.median(&rae))
        }
        ReplicateMeasure::Pb => {
            let wins: Vec<f64> = abs_err.iter().map(|&e| if e <= rw { 1.0 } else { 0.0 }).collect();
            ReplicateValue::plain(agg.mean(&wins))
        }
    })
}

/// Weeks × series grid of replicate predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMatrix {
    pub weeks: Vec<Week>,
    /// `values[w][s]`: series `s` at `weeks[w]`.
    pub values: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

impl ReplicateMatrix {
    pub fn new(weeks: Vec<Week>, values: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if weeks.len() != values.len() {
            return Err(StochasticError::LengthMismatch(weeks.len(), values.len()));
        }
        let width = values.first().map(Vec::len).ok_or(StochasticError::EmptyReplicates)?;
        if width == 0 {
            return Err(StochasticError::EmptyReplicates);
        }
        if values.iter().any(|r| r.len() != width) {
            return Err(StochasticError::Ragged);
        }
        if let Some(w) = &weights {
            check_weights(w, width).map_err(StochasticError::InvalidWeights)?;
        }
        Ok(Self { weeks, values, weights })
    }

    pub fn series_count(&self) -> usize {
        self.values[0].len()
    }

    /// Series `s` across all weeks.
    pub fn series(&self, s: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[s]).collect()
    }

    /// One value per week; `rw_forecast` is the random-walk prediction for
    /// each week.
    pub fn measure_by_week(
        &self,
        id: ReplicateMeasure,
        observed: &[f64],
        rw_forecast: &[f64],
    ) -> Result<Vec<ReplicateValue>> {
        if observed.len() != self.weeks.len() {
            return Err(StochasticError::LengthMismatch(observed.len(), self.weeks.len()));
        }
        if rw_forecast.len() != self.weeks.len() {
            return Err(StochasticError::LengthMismatch(rw_forecast.len(), self.weeks.len()));
        }
        self.values
            .iter()
            .zip(observed.iter().zip(rw_forecast))
            .map(|(row, (&y, &rw))| replicate_measure(id, y, row, Some((y - rw).abs()), self.weights.as_deref()))
            .collect()
    }
}

/// Ratio of a series' cumulative absolute error to the random walk's.
pub fn cum_rae(observed: &[f64], series: &[f64], rw_forecast: &[f64]) -> Result<f64> {
    if observed.len() != series.len() {
        return Err(StochasticError::LengthMismatch(observed.len(), series.len()));
    }
    if observed.len() != rw_forecast.len() {
        return Err(StochasticError::LengthMismatch(observed.len(), rw_forecast.len()));
    }
    let rw: f64 = observed.iter().zip(rw_forecast).map(|(y, r)| (y - r).abs()).sum();
    if rw == 0.0 {
        return Err(StochasticError::ZeroRwCumulative);
    }
    Ok(observed.iter().zip(series).map(|(y, x)| (y - x).abs()).sum::<f64>() / rw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CumulativeAggregate {
    /// GMCumRAE
    Geometric,
    /// MdCumRAE
    Median,
}

/// CumRAE of every series combined by geometric mean or median.
pub fn cumulative_relative(
    aggregate: CumulativeAggregate,
    observed: &[f64],
    series_set: &[Vec<f64>],
    rw_forecast: &[f64],
) -> Result<ReplicateValue> {
    if series_set.is_empty() {
        return Err(StochasticError::EmptyReplicates);
    }
    let ratios = series_set
        .iter()
        .map(|s| cum_rae(observed, s, rw_forecast))
        .collect::<Result<Vec<_>>>()?;
    let agg = Agg { weights: None };
    Ok(match aggregate {
        CumulativeAggregate::Geometric => agg.geometric(&ratios),
        CumulativeAggregate::Median => ReplicateValue::plain(agg.median(&ratios)),
    })
}

/// Bootstrap draw from a predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<f64>,
    pub source: DistSpec,
    pub seed: u64,
}

impl SampleSet {
    pub fn size(&self) -> usize {
        self.samples.len()
    }
}

/// Mixes a run seed with a week index and a stream tag.
pub fn sub_seed(seed: u64, week: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ week) ^ stream)
}

fn draw(spec: &DistSpec, size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let invalid = |e: &dyn std::fmt::Display| StochasticError::InvalidSpec(e.to_string());
    Ok(match spec.kind() {
        DistKind::Normal { mean, sd } if *sd == 0.0 => vec![*mean; size],
        DistKind::Normal { mean, sd } => {
            let d = rand_distr::Normal::new(*mean, *sd).map_err(|e| invalid(&e))?;
            d.sample_iter(rng).take(size).collect()
        }
        DistKind::StudentT { mean, dof, scale } => {
            let d = rand_distr::StudentT::new(*dof).map_err(|e| invalid(&e))?;
            (0..size).map(|_| mean + scale * d.sample(rng)).collect()
        }
        DistKind::Empirical { samples, weights } => match weights {
            Some(w) => {
                let idx = WeightedIndex::new(w).map_err(|e| invalid(&e))?;
                (0..size).map(|_| samples[idx.sample(rng)]).collect()
            }
            None => (0..size).map(|_| samples[rng.random_range(0..samples.len())]).collect(),
        },
    })
}

/// Draws `size` values from `spec`; identical `(spec, size, seed)` give
/// identical samples.
pub fn sample_pdf(spec: &DistSpec, size: usize, seed: u64) -> Result<SampleSet> {
    if size < MIN_SAMPLE_SIZE {
        return Err(StochasticError::SampleSizeTooSmall(size));
    }
    if size < 10 * spec.sample_count() as usize {
        log::warn!(
            "bootstrap size {size} is not much larger than the source sample count {}",
            spec.sample_count()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SampleSet {
        samples: draw(spec, size, &mut rng)?,
        source: spec.clone(),
        seed,
    })
}

/// Density of `spec` at `x`, when it has one.
pub fn density(spec: &DistSpec, x: f64) -> Option<f64> {
    match spec.kind() {
        DistKind::Normal { mean, sd } if *sd > 0.0 => {
            let z = (x - mean) / sd;
            Some((-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt()))
        }
        DistKind::StudentT { mean, dof, scale } => {
            let z = (x - mean) / scale;
            let v = *dof;
            let log_norm = libm::lgamma((v + 1.0) / 2.0) - libm::lgamma(v / 2.0) - 0.5 * (v * PI).ln() - scale.ln();
            Some((log_norm - (v + 1.0) / 2.0 * (1.0 + z * z / v).ln()).exp())
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdfDistance {
    Bhattacharyya,
    Hellinger,
    Jaccard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    ClosedFormNormal,
    Sampled { size: usize, seed: u64 },
}

fn normal_params(spec: &DistSpec) -> Option<(f64, f64)> {
    match spec.kind() {
        DistKind::Normal { mean, sd } if *sd > 0.0 => Some((*mean, *sd)),
        _ => None,
    }
}

/// Distance between two densities.
///
/// Closed forms exist for Bhattacharyya and Hellinger between normals. The
/// sampled route pools equal-size draws from both distributions and
/// evaluates both densities at every pooled point. Jaccard is the
/// inner-product ratio over those points; Bhattacharyya and Hellinger use
/// the pooled points as an importance sample for the overlap integral
/// `∫ sqrt(p q)`, with the equal-weight mixture as proposal.
pub fn pdf_distance(kind: PdfDistance, p: &DistSpec, q: &DistSpec, method: DistanceMethod) -> Result<f64> {
    match method {
        DistanceMethod::ClosedFormNormal => {
            let ((mp, sp), (mq, sq)) = normal_params(p)
                .zip(normal_params(q))
                .ok_or(StochasticError::ClosedFormUnavailable)?;
            let (vp, vq) = (sp * sp, sq * sq);
            let dm2 = (mp - mq).powi(2);
            match kind {
                PdfDistance::Bhattacharyya => {
                    Ok(0.25 * (0.25 * (vp / vq + vq / vp + 2.0)).ln() + 0.25 * dm2 / (vp + vq))
                }
                PdfDistance::Hellinger => {
                    let bc = (2.0 * sp * sq / (vp + vq)).sqrt() * (-dm2 / (4.0 * (vp + vq))).exp();
                    Ok((2.0 * (1.0 - bc)).max(0.0).sqrt())
                }
                PdfDistance::Jaccard => Err(StochasticError::ClosedFormUnavailable),
            }
        }
        DistanceMethod::Sampled { size, seed } => {
            let sx = sample_pdf(p, size, sub_seed(seed, 0, 0))?;
            let sy = sample_pdf(q, size, sub_seed(seed, 0, 1))?;
            let mut pairs = Vec::with_capacity(2 * size);
            for &s in sx.samples.iter().chain(&sy.samples) {
                let f = density(p, s).ok_or(StochasticError::DensityUnavailable)?;
                let g = density(q, s).ok_or(StochasticError::DensityUnavailable)?;
                pairs.push((f, g));
            }
            match kind {
                PdfDistance::Jaccard => {
                    let (mut fg, mut ff, mut gg) = (0.0, 0.0, 0.0);
                    for &(f, g) in &pairs {
                        fg += f * g;
                        ff += f * f;
                        gg += g * g;
                    }
                    let denom = ff + gg - fg;
                    if denom == 0.0 {
                        return Err(StochasticError::ZeroDenominator);
                    }
                    Ok(1.0 - fg / denom)
                }
                PdfDistance::Bhattacharyya | PdfDistance::Hellinger => {
                    let bc = pairs
                        .iter()
                        .map(|&(f, g)| {
                            let m = 0.5 * (f + g);
                            if m == 0.0 {
                                0.0
                            } else {
                                (f * g).sqrt() / m
                            }
                        })
                        .sum::<f64>()
                        / pairs.len() as f64;
                    let bc = bc.min(1.0);
                    Ok(match kind {
                        PdfDistance::Bhattacharyya => -bc.ln(),
                        _ => (2.0 * (1.0 - bc)).sqrt(),
                    })
                }
            }
        }
    }
}

/// Bootstrap settings for distribution-valued forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub size: usize,
    pub seed: u64,
    pub epsilon: EpsilonPolicy,
}

impl SamplingOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            size: DEFAULT_SAMPLE_SIZE,
            seed,
            epsilon: EpsilonPolicy::default(),
        }
    }
}

/// Expected (or median) error kernels of one week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeekScores {
    pub week: Week,
    /// E|y − x|
    pub abs_error: f64,
    /// E(y − x)²
    pub sq_error: f64,
    /// E|y − x| / |y|
    pub ape: f64,
    /// E 2|y − x| / (|y| + |x|)
    pub sape: f64,
    /// median of |y − x| / |y|
    pub median_ape: f64,
    /// median of 2|y − x| / (|y| + |x|)
    pub median_sape: f64,
}

/// Bootstrap error measures of a stochastic forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticScores {
    pub per_week: Vec<WeekScores>,
    /// Weekly values combined by mean (medians for MdAPE and MdsAPE).
    pub mean_over_weeks: BTreeMap<MeasureId, f64>,
    /// Weekly values combined by median.
    pub median_over_weeks: BTreeMap<MeasureId, f64>,
}

fn pairs_scores(week: Week, idx: usize, ys: &[f64], xs: &[f64], eps: Option<f64>) -> Result<WeekScores> {
    let n = xs.len();
    let mut abs = Vec::with_capacity(n);
    let mut sq = 0.0;
    let mut ape = Vec::with_capacity(n);
    let mut sape = Vec::with_capacity(n);
    for (&y, &x) in ys.iter().cycle().zip(xs) {
        let e = (y - x).abs();
        abs.push(e);
        sq += e * e;
        let denom = if y != 0.0 {
            y.abs()
        } else {
            eps.ok_or(StochasticError::DivisionByZero {
                measure: MeasureId::Mape,
                week: idx,
            })?
        };
        ape.push(e / denom);
        let d = y.abs() + x.abs();
        if d == 0.0 {
            return Err(StochasticError::DivisionByZero {
                measure: MeasureId::Smape,
                week: idx,
            });
        }
        sape.push(2.0 * e / d);
    }
    let nf = n as f64;
    Ok(WeekScores {
        week,
        abs_error: abs.iter().sum::<f64>() / nf,
        sq_error: sq / nf,
        ape: ape.iter().sum::<f64>() / nf,
        sape: sape.iter().sum::<f64>() / nf,
        median_ape: median(&ape).expect("non-empty"),
        median_sape: median(&sape).expect("non-empty"),
    })
}

fn summarize(per_week: Vec<WeekScores>) -> StochasticScores {
    let col = |f: fn(&WeekScores) -> f64| per_week.iter().map(f).collect::<Vec<_>>();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let med = |v: &[f64]| median(v).expect("non-empty");
    let abs = col(|w| w.abs_error);
    let sq = col(|w| w.sq_error);
    let ape = col(|w| w.ape);
    let sape = col(|w| w.sape);
    let md_ape = col(|w| w.median_ape);
    let md_sape = col(|w| w.median_sape);
    let mean_over_weeks = BTreeMap::from([
        (MeasureId::Mae, mean(&abs)),
        (MeasureId::Rmse, mean(&sq).sqrt()),
        (MeasureId::Mape, mean(&ape)),
        (MeasureId::Smape, mean(&sape)),
        (MeasureId::MdApe, med(&md_ape)),
        (MeasureId::MdsApe, med(&md_sape)),
    ]);
    let median_over_weeks = BTreeMap::from([
        (MeasureId::Mae, med(&abs)),
        (MeasureId::Rmse, med(&sq).sqrt()),
        (MeasureId::Mape, med(&ape)),
        (MeasureId::Smape, med(&sape)),
        (MeasureId::MdApe, med(&md_ape)),
        (MeasureId::MdsApe, med(&md_sape)),
    ]);
    StochasticScores {
        per_week,
        mean_over_weeks,
        median_over_weeks,
    }
}

fn epsilon_from(values: impl Iterator<Item = f64>, policy: EpsilonPolicy) -> Option<f64> {
    match policy {
        EpsilonPolicy::Strict => None,
        EpsilonPolicy::Corrected(Some(e)) => Some(e),
        EpsilonPolicy::Corrected(None) => values.map(f64::abs).filter(|&v| v > 0.0).min_by(f64::total_cmp),
    }
}

/// Bootstrap error measures of distribution forecasts against a
/// deterministic observed series. `pred[i]` forecasts `observed[i]` in week
/// `weeks[i]`.
pub fn measures_vs_point(
    weeks: &[Week],
    pred: &[DistSpec],
    observed: &[f64],
    opts: &SamplingOptions,
) -> Result<StochasticScores> {
    if pred.len() != observed.len() {
        return Err(StochasticError::LengthMismatch(pred.len(), observed.len()));
    }
    if weeks.len() != observed.len() {
        return Err(StochasticError::LengthMismatch(weeks.len(), observed.len()));
    }
    if observed.is_empty() {
        return Err(StochasticError::EmptyReplicates);
    }
    let eps = epsilon_from(observed.iter().copied(), opts.epsilon);
    let per_week = (0..pred.len())
        .into_par_iter()
        .map(|i| {
            let week = weeks[i];
            let xs = sample_pdf(&pred[i], opts.size, sub_seed(opts.seed, u64::from(week), 0))?;
            pairs_scores(week, i, &observed[i..=i], &xs.samples, eps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(per_week))
}

/// Bootstrap error measures between distribution forecasts and uncertain
/// observations. Each week pairs independent draws from both distributions.
pub fn measures_between_pdfs(
    weeks: &[Week],
    pred: &[DistSpec],
    observed: &[DistSpec],
    opts: &SamplingOptions,
) -> Result<StochasticScores> {
    if pred.len() != observed.len() {
        return Err(StochasticError::LengthMismatch(pred.len(), observed.len()));
    }
    if weeks.len() != observed.len() {
        return Err(StochasticError::LengthMismatch(weeks.len(), observed.len()));
    }
    if observed.is_empty() {
        return Err(StochasticError::EmptyReplicates);
    }
    let eps = epsilon_from(observed.iter().map(DistSpec::mean), opts.epsilon);
    let per_week = (0..pred.len())
        .into_par_iter()
        .map(|i| {
            let week = weeks[i];
            let xs = sample_pdf(&pred[i], opts.size, sub_seed(opts.seed, u64::from(week), 0))?;
            let ys = sample_pdf(&observed[i], opts.size, sub_seed(opts.seed, u64::from(week), 1))?;
            pairs_scores(week, i, &ys.samples, &xs.samples, eps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(per_week))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_examples() {
        let y = 10.0;
        let exact = replicate_measure(ReplicateMeasure::Mape, y, &[y, y, y], None, None).unwrap();
        assert_eq!(exact.value, 0.0);
        let pb = replicate_measure(ReplicateMeasure::Pb, y, &[y, y], Some(3.0), None).unwrap();
        assert_eq!(pb.value, 1.0);

        let reps = [y, 2.0 * y];
        assert_eq!(
            replicate_measure(ReplicateMeasure::Mape, y, &reps, None, None)
                .unwrap()
                .value,
            0.5
        );
        let weighted = replicate_measure(ReplicateMeasure::Mape, y, &reps, None, Some(&[0.9, 0.1])).unwrap();
        assert!((weighted.value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn relative_family_needs_rw_error() {
        assert_eq!(
            replicate_measure(ReplicateMeasure::MdRae, 1.0, &[2.0], Some(0.0), None),
            Err(StochasticError::ZeroRwError)
        );
        let g = replicate_measure(ReplicateMeasure::Gmrae, 4.0, &[4.0, 6.0], Some(2.0), None).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.degenerate_zero);
        // RAEs 1 and 4 -> geometric mean 2
        let g = replicate_measure(ReplicateMeasure::Gmrae, 4.0, &[2.0, 12.0], Some(2.0), None).unwrap();
        assert!((g.value - 2.0).abs() < 1e-12);
        assert!(!g.degenerate_zero);
    }

    #[test]
    fn uniform_weights_match_unweighted() {
        let row = [3.0, 7.0, 11.0, 2.0, 5.5, 9.0];
        let w = [1.0 / 6.0; 6];
        for id in ReplicateMeasure::ALL {
            let a = replicate_measure(id, 6.0, &row, Some(2.5), None).unwrap();
            let b = replicate_measure(id, 6.0, &row, Some(2.5), Some(&w)).unwrap();
            assert_eq!(a, b, "{id:?}");
        }
    }

    #[test]
    fn cumulative_examples() {
        let y = [10.0, 12.0, 9.0, 15.0];
        let rw = [10.0, 10.0, 12.0, 9.0];
        // rw errors 0, 2, 3, 6 = 11
        assert_eq!(cum_rae(&y, &rw, &rw).unwrap(), 1.0);
        assert_eq!(cum_rae(&y, &y, &rw).unwrap(), 0.0);
        let half = [10.0, 11.0, 10.5, 18.0]; // errors 0, 1, 1.5, 3 = 5.5
        assert_eq!(cum_rae(&y, &half, &rw).unwrap(), 0.5);
        assert_eq!(cum_rae(&y, &y, &y), Err(StochasticError::ZeroRwCumulative));

        let set = vec![rw.to_vec(), half.to_vec()];
        let md = cumulative_relative(CumulativeAggregate::Median, &y, &set, &rw).unwrap();
        assert_eq!(md.value, 0.75);
        let gm = cumulative_relative(CumulativeAggregate::Geometric, &y, &set, &rw).unwrap();
        assert!((gm.value - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = DistSpec::normal(5.0, 2.0).unwrap();
        let a = sample_pdf(&spec, 2000, 7).unwrap();
        let b = sample_pdf(&spec, 2000, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = sample_pdf(&spec, 2000, 8).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(sample_pdf(&spec, 10, 7).is_err());
    }

    #[test]
    fn point_mass_samples() {
        let s = sample_pdf(&DistSpec::normal(100.0, 0.0).unwrap(), 1000, 1).unwrap();
        assert!(s.samples.iter().all(|&x| x == 100.0));
    }

    #[test]
    fn standard_normal_moments() {
        let s = sample_pdf(&DistSpec::normal(0.0, 1.0).unwrap(), 100_000, 3).unwrap();
        let n = s.size() as f64;
        let mean = s.samples.iter().sum::<f64>() / n;
        let sd = (s.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // standard error of the mean is 1/sqrt(1e5) ≈ 0.0032
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((sd - 1.0).abs() < 0.02, "{sd}");
    }

    #[test]
    fn empirical_resampling_honours_weights() {
        let spec = DistSpec::empirical(vec![0.0, 1.0], Some(vec![0.9, 0.1])).unwrap();
        let s = sample_pdf(&spec, 20_000, 11).unwrap();
        let frac = s.samples.iter().filter(|&&x| x == 1.0).count() as f64 / 20_000.0;
        assert!((frac - 0.1).abs() < 0.01, "{frac}");
    }

    #[test]
    fn student_t_density_integrates_to_one() {
        let spec = DistSpec::student_t(3.0, 4.0, 2.0).unwrap();
        let h = 0.01;
        let total: f64 = (-20_000..20_000)
            .map(|i| density(&spec, 3.0 + i as f64 * h).unwrap() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn closed_form_examples() {
        let p = DistSpec::normal(0.0, 1.0).unwrap();
        let q = DistSpec::normal(2.0, 1.0).unwrap();
        let db = pdf_distance(PdfDistance::Bhattacharyya, &p, &q, DistanceMethod::ClosedFormNormal).unwrap();
        assert!((db - 0.5).abs() < 1e-15);
        let dh = pdf_distance(PdfDistance::Hellinger, &p, &q, DistanceMethod::ClosedFormNormal).unwrap();
        assert!((dh * dh - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-12);
        assert_eq!(
            pdf_distance(PdfDistance::Jaccard, &p, &q, DistanceMethod::ClosedFormNormal),
            Err(StochasticError::ClosedFormUnavailable)
        );
        let t = DistSpec::student_t(0.0, 3.0, 1.0).unwrap();
        assert_eq!(
            pdf_distance(PdfDistance::Hellinger, &p, &t, DistanceMethod::ClosedFormNormal),
            Err(StochasticError::ClosedFormUnavailable)
        );
    }

    #[test]
    fn identical_distributions_have_zero_distance() {
        let p = DistSpec::normal(3.0, 1.5).unwrap();
        for kind in [PdfDistance::Bhattacharyya, PdfDistance::Hellinger, PdfDistance::Jaccard] {
            let d = pdf_distance(kind, &p, &p, DistanceMethod::Sampled { size: 2000, seed: 5 }).unwrap();
            assert_eq!(d, 0.0, "{kind:?}");
        }
        for kind in [PdfDistance::Bhattacharyya, PdfDistance::Hellinger] {
            assert_eq!(
                pdf_distance(kind, &p, &p, DistanceMethod::ClosedFormNormal).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn sampled_distances_track_closed_forms() {
        let p = DistSpec::normal(0.0, 1.0).unwrap();
        let q = DistSpec::normal(2.0, 1.5).unwrap();
        let method = DistanceMethod::Sampled { size: 20_000, seed: 9 };
        for kind in [PdfDistance::Bhattacharyya, PdfDistance::Hellinger] {
            let exact = pdf_distance(kind, &p, &q, DistanceMethod::ClosedFormNormal).unwrap();
            let mc = pdf_distance(kind, &p, &q, method).unwrap();
            assert!((exact - mc).abs() < 0.02, "{kind:?}: {exact} vs {mc}");
        }
        let empirical = DistSpec::empirical(vec![1.0, 2.0], None).unwrap();
        assert_eq!(
            pdf_distance(PdfDistance::Jaccard, &p, &empirical, method),
            Err(StochasticError::DensityUnavailable)
        );
    }

    #[test]
    fn point_masses_reduce_to_deterministic_scores() {
        let observed = [10.0, 20.0, 40.0];
        let pred: Vec<DistSpec> = observed.iter().map(|y| DistSpec::point(2.0 * y).unwrap()).collect();
        let opts = SamplingOptions {
            size: 1000,
            ..SamplingOptions::new(1)
        };
        let s = measures_vs_point(&[1, 2, 3], &pred, &observed, &opts).unwrap();
        assert!((s.mean_over_weeks[&MeasureId::Mape] - 1.0).abs() < 1e-12);

        let same: Vec<DistSpec> = observed.iter().map(|y| DistSpec::point(*y).unwrap()).collect();
        let s = measures_between_pdfs(&[1, 2, 3], &same, &same, &opts).unwrap();
        assert!(s.mean_over_weeks.values().all(|&v| v == 0.0));
    }
}
