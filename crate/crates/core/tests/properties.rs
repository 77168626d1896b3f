mod support;

use epieval::stochastic::{replicate_measure, ReplicateMeasure};
use proptest::prelude::*;

const CASES: u32 = 1000;

fn check(result: Result<(), String>) {
    if let Err(e) = result {
        panic!("{e}");
    }
}

#[test]
fn features_scale_and_shift_covariantly() {
    check(support::feature_covariance(CASES));
}

#[test]
fn smape_stays_within_zero_and_two() {
    check(support::smape_bounds(CASES));
}

#[test]
fn maape_stays_within_a_quarter_turn() {
    check(support::maape_bounds(CASES));
}

#[test]
fn rmse_never_below_mae() {
    check(support::rmse_dominates_mae(CASES));
}

#[test]
fn ranks_survive_monotone_transforms() {
    check(support::rank_monotone_invariance(CASES));
}

#[test]
fn competition_rank_sum_is_bounded() {
    check(support::rank_sum_bound(CASES));
}

#[test]
fn pipeline_is_deterministic() {
    check(support::pipeline_determinism(CASES));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn uniform_weights_match_unweighted(
        row in prop::collection::vec(0.0f64..1e4, 1..40),
        observed in 1.0f64..1e4,
    ) {
        // Weights must sum to one.
        let weights = vec![1.0 / row.len() as f64; row.len()];
        for id in [ReplicateMeasure::Mape, ReplicateMeasure::Smape, ReplicateMeasure::MdApe, ReplicateMeasure::Rmse] {
            let a = replicate_measure(id, observed, &row, None, None).unwrap().value;
            let b = replicate_measure(id, observed, &row, None, Some(&weights)).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{:?}: {} vs {}", id, a, b);
        }
    }
}
