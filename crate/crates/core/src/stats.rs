//! Small order statistics shared by measures, rankings and reports.

use serde::{Deserialize, Serialize};

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median_of_sorted(v: &[f64]) -> Option<f64> {
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

/// Median; even-length input averages the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    median_of_sorted(&sorted(values))
}

/// Weighted median with weights summing to one.
///
/// Returns the first value whose cumulative weight reaches one half; when the
/// cumulative weight lands on one half exactly, the midpoint with the next
/// value is taken so that equal weights reproduce [`median`].
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Option<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return None;
    }
    if weights.iter().all(|&w| w == weights[0]) {
        return median(values);
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let half = total / 2.0;
    let mut cum = 0.0;
    for (i, &(v, w)) in pairs.iter().enumerate() {
        cum += w;
        if (cum - half).abs() <= 1e-12 * total {
            return Some(match pairs.get(i + 1) {
                Some(&(next, _)) => (v + next) / 2.0,
                None => v,
            });
        }
        if cum > half {
            return Some(v);
        }
    }
    pairs.last().map(|p| p.0)
}

/// Tukey box-plot summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Most extreme values within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    /// Quartiles are medians of the lower and upper halves; the middle value
    /// of an odd-length sample belongs to neither half.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let v = sorted(values);
        let n = v.len();
        let med = median_of_sorted(&v)?;
        let (lower, upper) = if n == 1 {
            (&v[..], &v[..])
        } else {
            (&v[..n / 2], &v[n.div_ceil(2)..])
        };
        let q1 = median_of_sorted(lower)?;
        let q3 = median_of_sorted(upper)?;
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let inside: Vec<f64> = v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence).collect();
        Some(Self {
            min: v[0],
            q1,
            median: med,
            q3,
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: v.iter().copied().filter(|&x| x < lo_fence || x > hi_fence).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[0.3, 0.1]), Some(0.2));
    }

    #[test]
    fn weighted_median_cases() {
        assert_eq!(weighted_median(&[0.0, 1.0], &[0.9, 0.1]), Some(0.0));
        assert_eq!(weighted_median(&[0.0, 1.0], &[0.1, 0.9]), Some(1.0));
        assert_eq!(weighted_median(&[0.0, 1.0, 3.0], &[0.25, 0.25, 0.5]), Some(2.0));
        let w = [1.0 / 6.0; 6];
        let v = [5.0, 1.0, 4.0, 2.0, 6.0, 3.0];
        assert_eq!(weighted_median(&v, &w), median(&v));
    }

    #[test]
    fn box_stats_flag_isolated_ranks() {
        // ranks of one method across six measures
        let b = BoxStats::from_values(&[4.0, 4.0, 4.0, 3.0, 6.0, 4.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (4.0, 4.0, 4.0));
        assert_eq!(b.outliers, vec![3.0, 6.0]);
        assert_eq!((b.whisker_low, b.whisker_high), (4.0, 4.0));

        let b = BoxStats::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (1.5, 3.0, 4.5));
        assert!(b.outliers.is_empty());
    }
}
