mod support;

use std::collections::BTreeMap;

use epieval::ranking::{cluster_by_mape, consensus_over_features, consensus_over_regions, rank_column};
use epieval::{ConsensusTable, MapeGroup, RankMatrix};
use support::*;

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[test]
fn reference_errors_rank_as_published() {
    let rm = RankMatrix::from_errors(&reference_error_matrix()).unwrap();
    for (i, row) in REFERENCE_RANKS.iter().enumerate() {
        assert_eq!(rm.ranks[i], row.to_vec(), "method {}", i + 1);
    }
    let consensus: Vec<f64> = rm.consensus.iter().map(|&c| round2(c)).collect();
    assert_eq!(consensus, REFERENCE_CONSENSUS.to_vec());
}

#[test]
fn printed_mape_agrees_where_untied() {
    let printed: Vec<f64> = REFERENCE_ERRORS.iter().map(|r| r[2]).collect();
    let ranks = rank_column(&printed, true).unwrap();
    for (i, v) in printed.iter().enumerate() {
        if printed.iter().filter(|&w| w == v).count() == 1 {
            assert_eq!(ranks[i], REFERENCE_RANKS[i][2], "method {}", i + 1);
        }
    }
}

#[test]
fn feature_consensus_averages() {
    let cells = REFERENCE_FEATURE_CONSENSUS.iter().map(|r| r.to_vec()).collect();
    let cols = (1..=8).map(|i| format!("f{i}")).collect();
    let table = ConsensusTable::new(method_names(6), cols, cells).unwrap();
    let scores = consensus_over_features(&table).unwrap();
    for (s, want) in scores.iter().zip(REFERENCE_FEATURE_AVERAGE) {
        assert!((s.mean - want).abs() <= 0.01, "{} vs {want}", s.mean);
    }
}

#[test]
fn region_consensus_averages() {
    let cells = REFERENCE_REGION_CONSENSUS.iter().map(|r| r.to_vec()).collect();
    let cols = (1..=10).map(|i| format!("r{i}")).collect();
    let table = ConsensusTable::new(method_names(6), cols, cells).unwrap();
    let avg = consensus_over_regions(&table).unwrap();
    for (a, want) in avg.iter().zip(REFERENCE_REGION_AVERAGE) {
        assert!((a - want).abs() <= 0.01, "{a} vs {want}");
    }
}

#[test]
fn one_step_mape_clusters() {
    let map: BTreeMap<String, f64> = REFERENCE_ONE_STEP_MAPE
        .iter()
        .map(|(m, v)| (m.to_string(), *v))
        .collect();
    let groups = cluster_by_mape(&map).unwrap();
    for (m, _) in REFERENCE_ONE_STEP_MAPE {
        let want = if m == "ARIMA" { MapeGroup::G2 } else { MapeGroup::G1 };
        assert_eq!(groups[m], want, "{m}");
    }
}
