//! Synthetic seasons and perturbed forecasters for end-to-end runs.
//!
//! Truth curves are a `sech²` bump, the incidence profile of logistic growth
//! followed by logistic decay. A forecaster is the truth pushed through a
//! fixed chain: centred moving average, phase shift, amplitude scaling and
//! additive noise truncated at zero. The identity configuration reproduces
//! the truth bit for bit.

use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CurveError, EpiCurve, ForecastRun, ForecastSet, Week, WeeklySeries};
use crate::stochastic::sub_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("prediction times {start}..={end} must lie within 2..={max}")]
    InvalidRange { start: Week, end: Week, max: Week },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub region_id: String,
    pub season_id: String,
    pub season_length: Week,
    pub peak_week: Week,
    pub peak_height: f64,
    /// Growth rate of the underlying logistic; larger is a narrower bump.
    pub onset_sharpness: f64,
    #[serde(default)]
    pub noise_stdev: f64,
    #[serde(default)]
    pub seed: u64,
    /// Constant weekly patient visits attached to the curve, if any.
    #[serde(default)]
    pub total_visits: Option<f64>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if !(1 < self.peak_week && self.peak_week < self.season_length) {
            return bad(format!(
                "peak week {} must lie strictly inside 1..{}",
                self.peak_week, self.season_length
            ));
        }
        if !(self.peak_height > 0.0 && self.peak_height.is_finite()) {
            return bad("peak height must be positive".into());
        }
        if !(self.onset_sharpness > 0.0 && self.onset_sharpness.is_finite()) {
            return bad("onset sharpness must be positive".into());
        }
        if !(self.noise_stdev >= 0.0 && self.noise_stdev.is_finite()) {
            return bad("noise stdev must be non-negative".into());
        }
        if self.total_visits.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return bad("total visits must be positive".into());
        }
        Ok(())
    }
}

/// One synthetic forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub method_id: String,
    #[serde(default = "one")]
    pub amplitude_bias: f64,
    /// Positive values delay the curve.
    #[serde(default)]
    pub phase_shift: i32,
    #[serde(default = "one_week")]
    pub smoothing_window: u32,
    #[serde(default)]
    pub noise_stdev: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn one_week() -> u32 {
    1
}

impl PerturbConfig {
    pub fn identity(method_id: impl Into<String>) -> Self {
        Self {
            method_id: method_id.into(),
            amplitude_bias: 1.0,
            phase_shift: 0,
            smoothing_window: 1,
            noise_stdev: 0.0,
            seed: 0,
        }
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.amplitude_bias = bias;
        self
    }

    pub fn with_shift(mut self, shift: i32) -> Self {
        self.phase_shift = shift;
        self
    }

    pub fn with_smoothing(mut self, window: u32) -> Self {
        self.smoothing_window = window;
        self
    }

    pub fn with_noise(mut self, stdev: f64, seed: u64) -> Self {
        self.noise_stdev = stdev;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(format!("{}: {m}", self.method_id)));
        if !(self.amplitude_bias > 0.0 && self.amplitude_bias.is_finite()) {
            return bad("amplitude bias must be positive");
        }
        if self.smoothing_window < 1 {
            return bad("smoothing window must be at least 1");
        }
        if !(self.noise_stdev >= 0.0 && self.noise_stdev.is_finite()) {
            return bad("noise stdev must be non-negative");
        }
        Ok(())
    }

    /// Deterministic part of the perturbation applied to a whole season.
    fn distort(&self, truth: &[f64]) -> Vec<f64> {
        let n = truth.len();
        let half = (self.smoothing_window / 2) as usize;
        let smoothed: Vec<f64> = if self.smoothing_window <= 1 {
            truth.to_vec()
        } else {
            (0..n)
                .map(|i| {
                    let lo = i.saturating_sub(half);
                    let hi = (i + half).min(n - 1);
                    truth[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
                })
                .collect()
        };
        (0..n as i64)
            .map(|i| {
                let src = (i - i64::from(self.phase_shift)).clamp(0, n as i64 - 1) as usize;
                smoothed[src] * self.amplitude_bias
            })
            .collect()
    }

    fn add_noise(&self, values: &mut [f64], k: Week) {
        if self.noise_stdev == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.seed, u64::from(k), 0));
        let noise = Normal::new(0.0, self.noise_stdev).expect("validated stdev");
        for v in values {
            *v = (*v + noise.sample(&mut rng)).max(0.0);
        }
    }
}

/// Noiseless bump value at week `t`.
fn bump(cfg: &SynthConfig, t: Week) -> f64 {
    let x = 0.5 * cfg.onset_sharpness * (f64::from(t) - f64::from(cfg.peak_week));
    let sech = 1.0 / x.cosh();
    cfg.peak_height * sech * sech
}

/// Synthetic season over weeks `1..=season_length`.
pub fn generate_curve(cfg: &SynthConfig) -> Result<EpiCurve> {
    cfg.validate()?;
    let mut values: Vec<f64> = (1..=cfg.season_length).map(|t| bump(cfg, t)).collect();
    if cfg.noise_stdev > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let noise = Normal::new(0.0, cfg.noise_stdev).expect("validated stdev");
        for v in &mut values {
            *v = (*v + noise.sample(&mut rng)).max(0.0);
        }
    }
    let n = values.len();
    let series = WeeklySeries::new(1, values)?;
    let curve = EpiCurve::from_series(&cfg.region_id, &cfg.season_id, series)?;
    Ok(match cfg.total_visits {
        Some(v) => curve.with_total_visits(vec![v; n])?,
        None => curve,
    })
}

/// One forecast set per method with a long-term run at every `k` in
/// `k_range`. Each run also carries fitted values for weeks up to `k`.
pub fn generate_forecast_family(
    truth: &Arc<EpiCurve>,
    methods: &[PerturbConfig],
    k_range: RangeInclusive<Week>,
) -> Result<Vec<ForecastSet>> {
    let first = truth.first_week();
    let last = truth.last_week();
    let (start, end) = (*k_range.start(), *k_range.end());
    if start < first + 1 || end > last.saturating_sub(1) || start > end {
        return Err(HarnessError::InvalidRange {
            start,
            end,
            max: last.saturating_sub(1),
        });
    }
    let counts = truth.counts().values();
    methods
        .iter()
        .map(|m| {
            m.validate()?;
            let base = m.distort(counts);
            let mut set = ForecastSet::new(&m.method_id, Arc::clone(truth));
            for k in k_range.clone() {
                let mut season = base.clone();
                m.add_noise(&mut season, k);
                let split = (k - first + 1) as usize;
                let fitted = WeeklySeries::new(first, season[..split].to_vec())?;
                let run = ForecastRun::new(&m.method_id, k, season[split..].to_vec())?.with_fitted(fitted)?;
                set.insert(run)?;
            }
            Ok(set)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(peak_week: Week, noise: f64) -> SynthConfig {
        SynthConfig {
            region_id: "r".into(),
            season_id: "s".into(),
            season_length: 52,
            peak_week,
            peak_height: 5000.0,
            onset_sharpness: 0.5,
            noise_stdev: noise,
            seed: 42,
            total_visits: None,
        }
    }

    #[test]
    fn noiseless_curve_is_unimodal_at_peak() {
        let c = generate_curve(&cfg(20, 0.0)).unwrap();
        let v = c.counts().values();
        assert_eq!(v[19], 5000.0);
        assert!(v[..20].windows(2).all(|w| w[0] < w[1]));
        assert!(v[19..].windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn early_peak_decreases_afterwards() {
        let c = generate_curve(&cfg(2, 0.0)).unwrap();
        assert!(c.counts().values()[1..].windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn noisy_curves_repeat_per_seed() {
        let a = generate_curve(&cfg(20, 50.0)).unwrap();
        let b = generate_curve(&cfg(20, 50.0)).unwrap();
        assert_eq!(a, b);
        assert!(a.counts().values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_curve(&cfg(1, 0.0)).is_err());
        assert!(generate_curve(&cfg(52, 0.0)).is_err());
        let truth = Arc::new(generate_curve(&cfg(20, 0.0)).unwrap());
        let id = [PerturbConfig::identity("m")];
        assert!(matches!(
            generate_forecast_family(&truth, &id, 1..=10),
            Err(HarnessError::InvalidRange { .. })
        ));
        assert!(generate_forecast_family(&truth, &id, 2..=52).is_err());
        assert!(generate_forecast_family(&truth, &[PerturbConfig::identity("m").with_bias(0.0)], 2..=5).is_err());
    }

    #[test]
    fn identity_reproduces_truth() {
        let truth = Arc::new(generate_curve(&cfg(20, 30.0)).unwrap());
        let sets = generate_forecast_family(&truth, &[PerturbConfig::identity("id")], 2..=51).unwrap();
        for run in sets[0].runs() {
            for (w, x) in run.predicted().iter() {
                assert_eq!(Some(x), truth.counts().get(w));
            }
            for (w, x) in run.fitted().unwrap().iter() {
                assert_eq!(Some(x), truth.counts().get(w));
            }
        }
        assert_eq!(sets[0].len(), 50);
    }

    #[test]
    fn perturbations_compose() {
        let truth = [0.0, 3.0, 6.0, 9.0, 6.0];
        let shifted = PerturbConfig::identity("m").with_shift(1).distort(&truth);
        assert_eq!(shifted, [0.0, 0.0, 3.0, 6.0, 9.0]);
        let smoothed = PerturbConfig::identity("m").with_smoothing(3).distort(&truth);
        assert_eq!(smoothed, [1.5, 3.0, 6.0, 7.0, 7.5]);
        let scaled = PerturbConfig::identity("m").with_bias(2.0).distort(&truth);
        assert_eq!(scaled, [0.0, 6.0, 12.0, 18.0, 12.0]);
    }

    #[test]
    fn families_repeat_bit_exactly() {
        let truth = Arc::new(generate_curve(&cfg(20, 0.0)).unwrap());
        let m = [PerturbConfig::identity("n").with_noise(100.0, 3)];
        let a = generate_forecast_family(&truth, &m, 2..=30).unwrap();
        let b = generate_forecast_family(&truth, &m, 2..=30).unwrap();
        for (x, y) in a[0].runs().zip(b[0].runs()) {
            assert_eq!(x, y);
        }
    }
}
