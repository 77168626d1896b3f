//! Independent oracles and property suites shared by the integration tests
//! and the acceptance binary.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use epieval::features::{extract_features, FeatureContext, FeatureVector};
use epieval::harness::{generate_curve, generate_forecast_family, PerturbConfig, SynthConfig};
use epieval::measures::random_walk_reference;
use epieval::ranking::rank_column;
use epieval::report::{csv_tables, run_with_inputs, EvalSettings, PipelineInputs};
use epieval::{compute_measure, EvaluationMode, FeatureConfig, FeatureId, MeasureId, MeasureOptions, WeeklySeries};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

/// Brute-force measure definitions, written loop by loop without sharing
/// code with the library.
pub mod oracle {
    use super::FRAC_PI_2;

    fn sorted_median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    pub fn mae(y: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..y.len() {
            s += (y[i] - x[i]).abs();
        }
        s / y.len() as f64
    }

    pub fn rmse(y: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..y.len() {
            s += (y[i] - x[i]) * (y[i] - x[i]);
        }
        (s / y.len() as f64).sqrt()
    }

    pub fn mape(y: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..y.len() {
            s += ((y[i] - x[i]) / y[i]).abs();
        }
        s / y.len() as f64
    }

    pub fn smape(y: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..y.len() {
            s += 2.0 * (y[i] - x[i]).abs() / (y[i].abs() + x[i].abs());
        }
        s / y.len() as f64
    }

    pub fn mdape(y: &[f64], x: &[f64]) -> f64 {
        sorted_median((0..y.len()).map(|i| ((y[i] - x[i]) / y[i]).abs()).collect())
    }

    pub fn mdsape(y: &[f64], x: &[f64]) -> f64 {
        sorted_median(
            (0..y.len())
                .map(|i| 2.0 * (y[i] - x[i]).abs() / (y[i].abs() + x[i].abs()))
                .collect(),
        )
    }

    /// Random walk predicts last week's value; week one predicts itself.
    fn rw(y: &[f64], i: usize) -> f64 {
        if i == 0 {
            y[0]
        } else {
            y[i - 1]
        }
    }

    pub fn mare(y: &[f64], x: &[f64]) -> f64 {
        let (mut s, mut n) = (0.0, 0);
        for i in 0..y.len() {
            let r = (y[i] - rw(y, i)).abs();
            if r != 0.0 {
                s += (y[i] - x[i]).abs() / r;
                n += 1;
            }
        }
        s / n as f64
    }

    pub fn relmae(y: &[f64], x: &[f64]) -> f64 {
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..y.len() {
            a += (y[i] - x[i]).abs();
            b += (y[i] - rw(y, i)).abs();
        }
        a / b
    }

    pub fn mase(y: &[f64], x: &[f64]) -> f64 {
        let n = y.len();
        let mut scale = 0.0;
        for i in 1..n {
            scale += (y[i] - y[i - 1]).abs();
        }
        scale /= (n - 1) as f64;
        mae(y, x) / scale
    }

    pub fn pb(y: &[f64], x: &[f64]) -> f64 {
        let mut wins = 0;
        for i in 0..y.len() {
            if (y[i] - x[i]).abs() <= (y[i] - rw(y, i)).abs() {
                wins += 1;
            }
        }
        wins as f64 / y.len() as f64
    }

    pub fn maape(y: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..y.len() {
            s += if y[i] == 0.0 {
                if x[i] == 0.0 {
                    0.0
                } else {
                    FRAC_PI_2
                }
            } else {
                ((y[i] - x[i]) / y[i]).abs().atan()
            };
        }
        s / y.len() as f64
    }

    pub fn nmse(y: &[f64], x: &[f64]) -> f64 {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let mut var = 0.0;
        for v in y {
            var += (v - mean) * (v - mean);
        }
        var /= n - 1.0;
        rmse(y, x).powi(2) / var
    }

    /// Competition ranks by counting strictly better entries.
    pub fn ranks(values: &[f64], lower_is_better: bool) -> Vec<u32> {
        values
            .iter()
            .map(|&v| {
                1 + values
                    .iter()
                    .filter(|&&w| if lower_is_better { w < v } else { w > v })
                    .count() as u32
            })
            .collect()
    }
}

/// Relative difference scaled by the larger magnitude (absolute near zero).
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() / scale
}

/// Adaptive Simpson quadrature on `[a, b]`, pre-split into `pieces`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, f1) = (f(x0), f(x1));
            let (m, fm, whole) = simpson(f, x0, f0, x1, f1);
            recurse(f, x0, f0, x1, f1, whole, m, fm, tol / pieces as f64, 40)
        })
        .sum()
}

pub fn normal_pdf(mu: f64, sigma: f64, x: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn int_series(min: u32, len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(min..20_000u32, len).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn features_of(values: &[f64], start: u32, cfg: &FeatureConfig) -> FeatureVector {
    let s = WeeklySeries::new(start, values.to_vec()).unwrap();
    extract_features(&s, &FeatureContext::default(), cfg).unwrap()
}

/// Scaling a curve by `c` (and the count thresholds with it) scales value
/// features by `c` and leaves times unchanged; shifting the calendar shifts
/// times only.
pub fn feature_covariance(cases: u32) -> Result<(), String> {
    let strategy = (int_series(0, 3..=52), -3i32..=3, 0u32..=20);
    run(cases, strategy, |(values, exp, shift)| {
        let c = 2f64.powi(exp);
        let max = values.iter().cloned().fold(0.0, f64::max).max(1.0);
        let mut cfg = FeatureConfig::new(max / 2.0);
        cfg.takeoff_threshold = max / 8.0;
        let base = features_of(&values, 1, &cfg);

        let scaled_values: Vec<f64> = values.iter().map(|v| v * c).collect();
        let mut scaled_cfg = cfg.clone();
        scaled_cfg.id_threshold *= c;
        scaled_cfg.takeoff_threshold *= c;
        let scaled = features_of(&scaled_values, 1, &scaled_cfg);
        prop_assert_eq!(scaled.peak_value, base.peak_value * c);
        prop_assert_eq!(scaled.peak_week, base.peak_week);
        prop_assert_eq!(scaled.takeoff_week, base.takeoff_week);
        prop_assert_eq!(scaled.takeoff_value, base.takeoff_value.map(|v| v * c));
        prop_assert_eq!(scaled.id_length, base.id_length);
        prop_assert_eq!(scaled.id_start, base.id_start);
        prop_assert_eq!(scaled.speed, base.speed.map(|v| v * c));

        let moved = features_of(&values, 1 + shift, &cfg);
        prop_assert_eq!(moved.peak_value, base.peak_value);
        prop_assert_eq!(moved.peak_week, base.peak_week + shift);
        prop_assert_eq!(moved.takeoff_week, base.takeoff_week.map(|w| w + shift));
        prop_assert_eq!(moved.takeoff_value, base.takeoff_value);
        prop_assert_eq!(moved.id_length, base.id_length);
        prop_assert_eq!(moved.id_start, base.id_start.map(|w| w + shift));
        prop_assert_eq!(moved.speed, base.speed);
        Ok(())
    })
}

fn pairs(min_y: u32) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((min_y..20_000u32, 0..40_000u32), 1..=52)
        .prop_map(|v| v.into_iter().map(|(y, x)| (f64::from(y), f64::from(x))).unzip())
}

fn m(id: MeasureId, y: &[f64], x: &[f64]) -> f64 {
    compute_measure(id, y, x, &MeasureOptions::default()).unwrap()
}

pub fn smape_bounds(cases: u32) -> Result<(), String> {
    run(cases, pairs(1), |(y, x)| {
        let v = m(MeasureId::Smape, &y, &x);
        prop_assert!((0.0..=2.0).contains(&v), "sMAPE {v}");
        let md = m(MeasureId::MdsApe, &y, &x);
        prop_assert!((0.0..=2.0).contains(&md), "MdsAPE {md}");
        Ok(())
    })
}

pub fn maape_bounds(cases: u32) -> Result<(), String> {
    run(cases, pairs(0), |(y, x)| {
        let v = m(MeasureId::Maape, &y, &x);
        prop_assert!((0.0..=FRAC_PI_2).contains(&v), "MAAPE {v}");
        Ok(())
    })
}

pub fn rmse_dominates_mae(cases: u32) -> Result<(), String> {
    let strategy = prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64), 1..=52)
        .prop_map(|v| v.into_iter().unzip::<f64, f64, Vec<f64>, Vec<f64>>());
    run(cases, strategy, |(y, x)| {
        let (rmse, mae) = (m(MeasureId::Rmse, &y, &x), m(MeasureId::Mae, &y, &x));
        // Equality holds when all errors are equal; allow for rounding there.
        prop_assert!(rmse >= mae * (1.0 - 1e-12), "RMSE {rmse} < MAE {mae}");
        Ok(())
    })
}

/// Strictly increasing transforms of a column leave its ranks unchanged.
pub fn rank_monotone_invariance(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(0u32..1000, 1..=20), |v| {
        let base: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
        let cubic: Vec<f64> = base.iter().map(|x| x * x * x + 3.0 * x + 7.0).collect();
        for lower in [true, false] {
            let a = rank_column(&base, lower).unwrap();
            prop_assert_eq!(&a, &rank_column(&cubic, lower).unwrap());
            prop_assert_eq!(&a, &oracle::ranks(&base, lower));
        }
        Ok(())
    })
}

/// Ranks lie in `1..=n`, the best is 1, and the sum reaches `n(n+1)/2` only
/// without ties.
pub fn rank_sum_bound(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(0u32..10, 1..=20), |v| {
        let vals: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
        let n = vals.len() as u32;
        let ranks = rank_column(&vals, true).unwrap();
        prop_assert!(ranks.iter().all(|&r| (1..=n).contains(&r)));
        prop_assert_eq!(*ranks.iter().min().unwrap(), 1);
        let sum: u32 = ranks.iter().sum();
        let mut distinct = v.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() == v.len() {
            prop_assert_eq!(sum, n * (n + 1) / 2);
        } else {
            prop_assert!(sum < n * (n + 1) / 2);
        }
        Ok(())
    })
}

fn synth_region(id: &str, len: u32, peak: u32, height: f64, sharpness: f64, noise: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        region_id: id.into(),
        season_id: "s".into(),
        season_length: len,
        peak_week: peak,
        peak_height: height,
        onset_sharpness: sharpness,
        noise_stdev: noise,
        seed,
        total_visits: Some(40.0 * height),
    }
}

pub fn settings() -> EvalSettings {
    let mut cfg = FeatureConfig::new(1000.0);
    cfg.season_threshold = Some(epieval::features::SeasonThreshold::Percent(1.0));
    EvalSettings {
        features: FeatureId::DEFAULT.to_vec(),
        measures: MeasureId::SELECTED.to_vec(),
        feature_config: cfg,
        mode: EvaluationMode::Forecasting,
        sampling: None,
    }
}

fn build_inputs(regions: &[SynthConfig], methods: &[PerturbConfig]) -> PipelineInputs {
    let regions = regions
        .iter()
        .map(|r| {
            let truth = Arc::new(generate_curve(r).unwrap());
            let sets = generate_forecast_family(&truth, methods, 2..=r.season_length - 1).unwrap();
            (truth, sets)
        })
        .collect();
    PipelineInputs {
        regions,
        ..Default::default()
    }
}

/// Two runs of the pipeline on identical inputs give identical bundles and
/// identical CSV bytes.
pub fn pipeline_determinism(cases: u32) -> Result<(), String> {
    let strategy = (
        12u32..=30,
        0.2f64..0.8,
        1000.0f64..6000.0,
        0.0f64..80.0,
        any::<u64>(),
        prop::collection::vec((0.5f64..2.0, -2i32..=2, 1u32..=5, 0.0f64..100.0, any::<u64>()), 2..=4),
    );
    run(cases, strategy, |(len, sharp, height, noise, seed, methods)| {
        let region = synth_region("r", len, len / 2, height, sharp, noise, seed);
        let methods: Vec<PerturbConfig> = methods
            .into_iter()
            .enumerate()
            .map(|(i, (b, s, w, n, sd))| {
                PerturbConfig::identity(format!("m{i}"))
                    .with_bias(b)
                    .with_shift(s)
                    .with_smoothing(w)
                    .with_noise(n, sd)
            })
            .collect();
        let a = run_with_inputs(build_inputs(std::slice::from_ref(&region), &methods), &settings());
        let b = run_with_inputs(build_inputs(std::slice::from_ref(&region), &methods), &settings());
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a, &b);
                prop_assert_eq!(csv_tables(&a), csv_tables(&b));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "one run failed and the other did not"),
        }
        Ok(())
    })
}

/// Every property suite, by name.
pub fn property_suites(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("feature scale/shift covariance", feature_covariance(cases)),
        ("sMAPE within [0, 2]", smape_bounds(cases)),
        ("MAAPE within [0, pi/2]", maape_bounds(cases)),
        ("RMSE >= MAE", rmse_dominates_mae(cases)),
        ("rank invariance under monotone maps", rank_monotone_invariance(cases)),
        ("competition rank sum bound", rank_sum_bound(cases)),
        ("pipeline determinism", pipeline_determinism(cases)),
    ]
}

/// Six synthetic forecasters of increasing bias and noise; the first is
/// exact.
pub fn graded_methods() -> Vec<PerturbConfig> {
    vec![
        PerturbConfig::identity("M0-exact"),
        PerturbConfig::identity("M1").with_bias(1.1).with_noise(20.0, 11),
        PerturbConfig::identity("M2").with_bias(1.25).with_noise(40.0, 12),
        PerturbConfig::identity("M3")
            .with_bias(1.45)
            .with_shift(1)
            .with_noise(60.0, 13),
        PerturbConfig::identity("M4")
            .with_bias(0.6)
            .with_shift(2)
            .with_smoothing(5)
            .with_noise(80.0, 14),
        PerturbConfig::identity("M5")
            .with_bias(2.0)
            .with_shift(-3)
            .with_smoothing(7)
            .with_noise(100.0, 15),
    ]
}

pub fn three_regions() -> Vec<SynthConfig> {
    vec![
        synth_region("north", 52, 18, 6000.0, 0.45, 60.0, 1),
        synth_region("central", 52, 22, 4500.0, 0.55, 40.0, 2),
        synth_region("south", 52, 26, 3000.0, 0.35, 30.0, 3),
    ]
}

pub fn graded_inputs() -> PipelineInputs {
    build_inputs(&three_regions(), &graded_methods())
}

pub fn rw(y: &[f64]) -> Vec<f64> {
    random_walk_reference(y)
}

/// Reference feature-error scores of six methods on peak value, in the
/// measure order MAE, RMSE, MAPE, sMAPE, MdAPE, MdsAPE. MAPE is printed
/// rounded and ties there; see [`reconstructed_mape`].
pub const REFERENCE_ERRORS: [[f64; 6]; 6] = [
    [4992.0, 9838.6, 4.9, 1.04, 1.7, 1.03],
    [4825.2, 9770.4, 4.7, 0.99, 1.4, 0.95],
    [3263.0, 5146.5, 3.2, 0.96, 1.5, 1.01],
    [2990.7, 4651.3, 2.9, 0.899, 1.1, 0.85],
    [3523.2, 5334.8, 3.4, 0.95, 2.1, 1.01],
    [3310.9, 4948.5, 3.2, 0.896, 1.5, 0.85],
];

/// Competition ranks of [`REFERENCE_ERRORS`], column by column.
pub const REFERENCE_RANKS: [[u32; 6]; 6] = [
    [6, 6, 6, 6, 5, 6],
    [5, 5, 5, 5, 2, 3],
    [2, 3, 2, 4, 3, 4],
    [1, 1, 1, 2, 1, 1],
    [4, 4, 4, 3, 6, 4],
    [3, 2, 3, 1, 3, 1],
];

pub const REFERENCE_CONSENSUS: [f64; 6] = [5.83, 4.17, 3.00, 1.17, 4.17, 2.17];

/// The peak is a single observed value, so MAPE is MAE divided by a
/// constant and ranks exactly as MAE does. Unrounded MAPE is rebuilt that
/// way.
pub fn reconstructed_mape(row: &[f64; 6]) -> f64 {
    row[0] / 1000.0
}

/// Consensus per feature (columns: peak value, peak time, take-off value,
/// take-off time, intensity length, intensity start, season start, speed).
pub const REFERENCE_FEATURE_CONSENSUS: [[f64; 8]; 6] = [
    [5.83, 3.83, 6.0, 1.0, 3.33, 5.67, 6.0, 5.83],
    [4.17, 4.5, 5.0, 2.0, 1.0, 4.33, 5.0, 4.5],
    [3.0, 2.83, 3.83, 3.0, 3.33, 3.17, 3.0, 3.17],
    [1.17, 3.33, 1.17, 5.0, 4.0, 1.0, 1.0, 1.17],
    [4.17, 1.17, 3.0, 4.0, 4.33, 4.67, 3.0, 4.17],
    [2.17, 2.33, 1.5, 6.0, 4.67, 2.0, 1.0, 1.67],
];

pub const REFERENCE_FEATURE_AVERAGE: [f64; 6] = [4.69, 3.81, 3.17, 2.23, 3.56, 2.67];

/// Consensus per region, ten regions.
pub const REFERENCE_REGION_CONSENSUS: [[f64; 10]; 6] = [
    [4.69, 3.31, 4.6, 3.94, 3.65, 2.21, 4.3, 3.94, 3.46, 4.29],
    [3.81, 2.77, 4.23, 4.0, 3.71, 1.29, 3.73, 3.69, 3.79, 3.96],
    [3.17, 3.46, 1.96, 2.68, 2.67, 2.21, 3.03, 2.73, 2.17, 2.33],
    [2.23, 3.19, 2.04, 2.7, 3.08, 1.29, 2.93, 2.60, 2.44, 3.71],
    [3.56, 1.79, 1.79, 2.41, 2.77, 2.21, 2.67, 3.06, 2.88, 2.67],
    [2.67, 3.23, 2.13, 2.48, 2.83, 1.29, 2.60, 3.27, 3.13, 3.58],
];

pub const REFERENCE_REGION_AVERAGE: [f64; 6] = [3.84, 3.50, 2.64, 2.62, 2.58, 2.72];

/// One-step-ahead MAPE of seven methods; the last is a seasonal ARIMA.
pub const REFERENCE_ONE_STEP_MAPE: [(&str, f64); 7] = [
    ("M1", 0.39),
    ("M2", 0.35),
    ("M3", 0.25),
    ("M4", 0.21),
    ("M5", 0.25),
    ("M6", 0.21),
    ("ARIMA", 0.77),
];

pub fn method_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("M{i}")).collect()
}

/// [`REFERENCE_ERRORS`] with MAPE rebuilt, as an error matrix.
pub fn reference_error_matrix() -> epieval::ErrorMatrix {
    let cells = REFERENCE_ERRORS
        .iter()
        .map(|row| {
            let mut r = row.to_vec();
            r[2] = reconstructed_mape(row);
            r
        })
        .collect();
    epieval::ErrorMatrix::new(method_names(6), MeasureId::SELECTED.to_vec(), cells).unwrap()
}
