//! Competition ranks, consensus rankings and horizon rankings.
//!
//! Ties share the best rank and the next distinct value skips ahead
//! ("1224" ranking). Consensus at every level is the arithmetic mean of the
//! ranks or consensus values being aggregated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Week;
use crate::features::FeatureId;
use crate::measures::{compute_measure, FeatureErrorSeries, MeasureError, MeasureId, MeasureOptions};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankingError {
    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("negative error value {value} at row {row}")]
    NegativeValue { row: usize, value: f64 },
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("matrix is not rectangular: row {row} has {got} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("no prediction time is shared by every method")]
    NoCommonPredictionTimes,
    #[error("negative MAPE {value} for {method}")]
    NegativeMape { method: String, value: f64 },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub type Result<T> = std::result::Result<T, RankingError>;

/// Competition ranks of a column; rank = 1 + number of strictly better
/// entries.
pub fn rank_column(values: &[f64], lower_is_better: bool) -> Result<Vec<u32>> {
    if values.is_empty() {
        return Err(RankingError::EmptyMatrix);
    }
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(RankingError::NonFiniteValue { row });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    let key = |i: usize| if lower_is_better { values[i] } else { -values[i] };
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    let mut ranks = vec![0u32; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && key(order[pos - 1]) == key(i) {
            ranks[order[pos - 1]]
        } else {
            pos as u32 + 1
        };
    }
    Ok(ranks)
}

fn check_rect<T>(rows: &[Vec<T>]) -> Result<usize> {
    let width = rows.first().map(Vec::len).ok_or(RankingError::EmptyMatrix)?;
    if width == 0 {
        return Err(RankingError::EmptyMatrix);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(RankingError::Ragged {
                row,
                expected: width,
                got: r.len(),
            });
        }
    }
    Ok(width)
}

/// Methods × measures error values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMatrix {
    pub methods: Vec<String>,
    pub measures: Vec<MeasureId>,
    pub cells: Vec<Vec<f64>>,
}

impl ErrorMatrix {
    pub fn new(methods: Vec<String>, measures: Vec<MeasureId>, cells: Vec<Vec<f64>>) -> Result<Self> {
        let width = check_rect(&cells)?;
        if width != measures.len() || cells.len() != methods.len() {
            return Err(RankingError::Ragged {
                row: 0,
                expected: measures.len(),
                got: width,
            });
        }
        for (row, r) in cells.iter().enumerate() {
            for &value in r {
                if !value.is_finite() {
                    return Err(RankingError::NonFiniteValue { row });
                }
                if value < 0.0 {
                    return Err(RankingError::NegativeValue { row, value });
                }
            }
        }
        Ok(Self {
            methods,
            measures,
            cells,
        })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cells.iter().map(|r| r[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusScore {
    pub mean: f64,
    pub median: f64,
}

/// Ranks of an [`ErrorMatrix`] with per-method consensus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub methods: Vec<String>,
    pub measures: Vec<MeasureId>,
    pub ranks: Vec<Vec<u32>>,
    pub consensus: Vec<f64>,
    pub median_rank: Vec<f64>,
}

impl RankMatrix {
    pub fn from_errors(errors: &ErrorMatrix) -> Result<Self> {
        let n = errors.methods.len();
        let mut ranks = vec![Vec::with_capacity(errors.measures.len()); n];
        for (j, m) in errors.measures.iter().enumerate() {
            let col = rank_column(&errors.column(j), m.lower_is_better())?;
            for (i, r) in col.into_iter().enumerate() {
                ranks[i].push(r);
            }
        }
        let scores = consensus_over_measures(&ranks)?;
        Ok(Self {
            methods: errors.methods.clone(),
            measures: errors.measures.clone(),
            consensus: scores.iter().map(|s| s.mean).collect(),
            median_rank: scores.iter().map(|s| s.median).collect(),
            ranks,
        })
    }
}

fn row_scores(rows: &[Vec<f64>]) -> Result<Vec<ConsensusScore>> {
    check_rect(rows)?;
    Ok(rows
        .iter()
        .map(|r| ConsensusScore {
            mean: r.iter().sum::<f64>() / r.len() as f64,
            median: median(r).expect("non-empty row"),
        })
        .collect())
}

/// Mean and median rank of each method (row) across measure columns.
pub fn consensus_over_measures(ranks: &[Vec<u32>]) -> Result<Vec<ConsensusScore>> {
    let rows: Vec<Vec<f64>> = ranks
        .iter()
        .map(|r| r.iter().map(|&x| f64::from(x)).collect())
        .collect();
    row_scores(&rows)
}

/// Methods × columns table of consensus values (features or regions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusTable {
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

impl ConsensusTable {
    pub fn new(methods: Vec<String>, columns: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self> {
        let width = check_rect(&cells)?;
        if width != columns.len() || cells.len() != methods.len() {
            return Err(RankingError::Ragged {
                row: 0,
                expected: columns.len(),
                got: width,
            });
        }
        if let Some(row) = cells.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(RankingError::NonFiniteValue { row });
        }
        Ok(Self {
            methods,
            columns,
            cells,
        })
    }
}

/// Second level: average (and median) consensus across features.
pub fn consensus_over_features(table: &ConsensusTable) -> Result<Vec<ConsensusScore>> {
    row_scores(&table.cells)
}

/// Third level: average consensus across regions.
pub fn consensus_over_regions(table: &ConsensusTable) -> Result<Vec<f64>> {
    Ok(row_scores(&table.cells)?.into_iter().map(|s| s.mean).collect())
}

/// Per-prediction-time ranks of methods on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRanking {
    pub feature: FeatureId,
    pub methods: Vec<String>,
    pub measures: Vec<MeasureId>,
    pub prediction_times: Vec<Week>,
    /// `ranks[method][i]` is the averaged rank at `prediction_times[i]`, or
    /// `None` where the method had no prediction.
    pub ranks: Vec<Vec<Option<f64>>>,
    /// `(k, method)` pairs excluded for lack of a prediction.
    pub excluded: Vec<(Week, String)>,
}

/// Ranks methods at every prediction time by each scalar measure and
/// averages the ranks.
pub fn horizon_ranking(series: &[FeatureErrorSeries], measures: &[MeasureId]) -> Result<HorizonRanking> {
    let first = series.first().ok_or(RankingError::EmptyMatrix)?;
    if measures.is_empty() {
        return Err(RankingError::EmptyMatrix);
    }
    let per_method: Vec<BTreeMap<Week, (f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().map(|p| (p.k, (p.observed, p.predicted))).collect())
        .collect();
    let all_ks: BTreeSet<Week> = per_method.iter().flat_map(|m| m.keys().copied()).collect();
    if !all_ks.iter().any(|k| per_method.iter().all(|m| m.contains_key(k))) {
        return Err(RankingError::NoCommonPredictionTimes);
    }

    let opts = MeasureOptions::default();
    let mut ranks = vec![Vec::with_capacity(all_ks.len()); series.len()];
    let mut excluded = Vec::new();
    for &k in &all_ks {
        let present: Vec<usize> = (0..series.len()).filter(|&i| per_method[i].contains_key(&k)).collect();
        for (i, s) in series.iter().enumerate() {
            if !per_method[i].contains_key(&k) {
                excluded.push((k, s.method_id.clone()));
            }
        }
        let mut sums = vec![0.0; series.len()];
        for &m in measures {
            let values = present
                .iter()
                .map(|&i| {
                    let (y, x) = per_method[i][&k];
                    compute_measure(m, &[y], &[x], &opts)
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            for (r, &i) in rank_column(&values, m.lower_is_better())?.into_iter().zip(&present) {
                sums[i] += f64::from(r);
            }
        }
        for (i, row) in ranks.iter_mut().enumerate() {
            row.push(present.contains(&i).then(|| sums[i] / measures.len() as f64));
        }
    }
    Ok(HorizonRanking {
        feature: first.feature,
        methods: series.iter().map(|s| s.method_id.clone()).collect(),
        measures: measures.to_vec(),
        prediction_times: all_ks.into_iter().collect(),
        ranks,
        excluded,
    })
}

/// MAPE band of a one-step-ahead curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MapeGroup {
    /// 0 ≤ MAPE ≤ 0.5
    G1,
    /// 0.5 < MAPE ≤ 1
    G2,
    /// 1 < MAPE ≤ 2
    G3,
    /// MAPE > 2
    G4,
}

impl MapeGroup {
    /// Boundary values fall into the lower (better) group.
    pub fn of(mape: f64) -> Option<Self> {
        if !(mape >= 0.0) {
            return None;
        }
        Some(if mape <= 0.5 {
            MapeGroup::G1
        } else if mape <= 1.0 {
            MapeGroup::G2
        } else if mape <= 2.0 {
            MapeGroup::G3
        } else {
            MapeGroup::G4
        })
    }

    pub fn interval(self) -> &'static str {
        match self {
            MapeGroup::G1 => "[0, 0.5]",
            MapeGroup::G2 => "(0.5, 1]",
            MapeGroup::G3 => "(1, 2]",
            MapeGroup::G4 => "(2, inf)",
        }
    }
}

impl fmt::Display for MapeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

pub fn cluster_by_mape(mape: &BTreeMap<String, f64>) -> Result<BTreeMap<String, MapeGroup>> {
    mape.iter()
        .map(|(method, &value)| {
            MapeGroup::of(value)
                .map(|g| (method.clone(), g))
                .ok_or_else(|| RankingError::NegativeMape {
                    method: method.clone(),
                    value,
                })
        })
        .collect()
}
