//! Spike-time standardization and the temporal ReLU.
//!
//! Every layer's raw spiking times are standardized — mean subtracted,
//! divided by the population standard deviation — over the non-silent
//! entries, so each layer operates in the same range of values and the
//! kernel never saturates. Silent entries (`+∞`) pass through untouched
//! and are excluded from the statistics.
//!
//! The *temporal ReLU* cancels every neuron whose standardized time falls
//! strictly above the layer's `q`-quantile, forcing it to `+∞`. This is a
//! lateral inhibition: the earliest neurons of the layer silence the
//! slower ones. `q = 1` keeps everything (slow regime), `q = 0.5` keeps
//! only the earlier half (fast regime), where the cutoff is the median
//! and the ReLU reduces to "keep `z < 0`".

use serde::{Deserialize, Serialize};

use crate::error::{DennError, Result};

/// Sentinel spike time of a silent neuron.
pub const SILENT: f64 = f64::INFINITY;

/// Spread below which a layer is considered degenerate.
pub const STD_FLOOR: f64 = 1e-12;

/// A layer's standardized spike times; `+∞` entries are silent.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedTimes {
    pub values: Vec<f64>,
}

impl StandardizedTimes {
    pub fn new(values: Vec<f64>) -> Self {
        StandardizedTimes { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn is_silent(&self, i: usize) -> bool {
        self.values[i] == SILENT
    }

    /// Mask with `true` at silent entries.
    pub fn silent_mask(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v == SILENT).collect()
    }

    pub fn n_valid(&self) -> usize {
        self.values.iter().filter(|&&v| v != SILENT).count()
    }
}

/// Standardization output: the values plus the statistics the backward
/// pass needs.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub times: StandardizedTimes,
    pub mean: f64,
    /// Population (divide-by-n) standard deviation over non-silent entries.
    pub std: f64,
    pub n_valid: usize,
}

/// Standardize `t` over its non-silent entries.
///
/// Non-silent entries become `(t - mean)/popstd`; silent entries stay
/// `+∞`. Fails when fewer than two entries are non-silent or the spread
/// is numerically zero.
pub fn standardize(t: &[f64]) -> Result<Standardized> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for &v in t {
        if v != SILENT {
            n += 1;
            sum += v;
        }
    }
    if n < 2 {
        return Err(DennError::DegenerateLayer(format!(
            "{n} non-silent entries, need at least 2"
        )));
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for &v in t {
        if v != SILENT {
            let d = v - mean;
            ss += d * d;
        }
    }
    let std = (ss / n as f64).sqrt();
    if std < STD_FLOOR {
        return Err(DennError::DegenerateLayer(format!(
            "population std {std:.3e} below {STD_FLOOR:.0e}"
        )));
    }
    let values = t
        .iter()
        .map(|&v| {
            if v == SILENT {
                SILENT
            } else {
                (v - mean) / std
            }
        })
        .collect();
    Ok(Standardized {
        times: StandardizedTimes::new(values),
        mean,
        std,
        n_valid: n,
    })
}

/// Regime of a layer: the survival quantile `q ∈ (0, 1]`.
///
/// `q = 1` is the slow regime (identity), `q = 0.5` the fast regime where
/// only times up to the median survive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub q: f64,
}

impl RegimeConfig {
    pub const SLOW: RegimeConfig = RegimeConfig { q: 1.0 };
    pub const FAST: RegimeConfig = RegimeConfig { q: 0.5 };

    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(DennError::Config(format!("q must lie in (0, 1], got {q}")));
        }
        Ok(RegimeConfig { q })
    }

    pub fn is_identity(&self) -> bool {
        self.q >= 1.0
    }
}

/// Empirical quantile of already-sorted values, by linear interpolation
/// between order statistics (the common "type 7" rule): the quantile sits
/// at rank `(n-1)·q`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Apply the temporal ReLU: entries strictly above the `q`-quantile of
/// the non-silent values are silenced. Ties with the quantile survive,
/// which makes the cut deterministic. Returns the new times and the
/// survival mask (`true` where the output is non-silent).
pub fn temp_relu(z: &StandardizedTimes, regime: RegimeConfig) -> (StandardizedTimes, Vec<bool>) {
    if regime.is_identity() {
        let survive = z.values.iter().map(|&v| v != SILENT).collect();
        return (z.clone(), survive);
    }
    let mut finite: Vec<f64> = z.values.iter().copied().filter(|&v| v != SILENT).collect();
    if finite.is_empty() {
        return (z.clone(), vec![false; z.len()]);
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cutoff = empirical_quantile(&finite, regime.q);
    let values: Vec<f64> = z
        .values
        .iter()
        .map(|&v| if v > cutoff { SILENT } else { v })
        .collect();
    let survive = values.iter().map(|&v| v != SILENT).collect();
    (StandardizedTimes::new(values), survive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standardize_hand_computed() {
        let out = standardize(&[1.0, 2.0, 3.0]).unwrap();
        // population std of [1,2,3] is sqrt(2/3)
        assert_relative_eq!(out.times.values[0], -1.224_744_871_391_589, epsilon = 1e-12);
        assert_relative_eq!(out.times.values[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.times.values[2], 1.224_744_871_391_589, epsilon = 1e-12);
        assert_relative_eq!(out.mean, 2.0);
        assert_relative_eq!(out.std, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn standardize_skips_silent() {
        let out = standardize(&[5.0, SILENT, 7.0]).unwrap();
        assert_eq!(out.times.values, vec![-1.0, SILENT, 1.0]);
        assert_eq!(out.mean, 6.0);
        assert_eq!(out.std, 1.0);
        assert_eq!(out.n_valid, 2);
    }

    #[test]
    fn degenerate_inputs_error() {
        // zero spread
        assert!(standardize(&[4.0, 4.0, 4.0, 4.0]).is_err());
        // fewer than two valid entries
        assert!(standardize(&[1.0, SILENT, SILENT]).is_err());
        assert!(standardize(&[SILENT, SILENT]).is_err());
        assert!(standardize(&[]).is_err());
    }

    #[test]
    fn standardized_moments() {
        let t: Vec<f64> = (0..257)
            .map(|i| (i as f64 * 0.37).sin() * 4.0 + 2.0)
            .collect();
        let out = standardize(&t).unwrap();
        let vals: Vec<f64> = out.times.values.clone();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn standardize_idempotent() {
        let t = vec![0.3, -1.7, SILENT, 2.2, 0.0, -0.4];
        let once = standardize(&t).unwrap();
        let twice = standardize(&once.times.values).unwrap();
        for (a, b) in once.times.values.iter().zip(&twice.times.values) {
            if *a == SILENT {
                assert_eq!(*b, SILENT);
            } else {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn temp_relu_slow_regime_is_identity() {
        let z = StandardizedTimes::new(vec![-0.5, 0.3]);
        let (out, survive) = temp_relu(&z, RegimeConfig::SLOW);
        assert_eq!(out.values, vec![-0.5, 0.3]);
        assert_eq!(survive, vec![true, true]);
    }

    #[test]
    fn temp_relu_fast_regime() {
        let z = StandardizedTimes::new(vec![-0.5, 0.3]);
        let (out, _) = temp_relu(&z, RegimeConfig::FAST);
        assert_eq!(out.values, vec![-0.5, SILENT]);

        // median of [-1,-1,1,1] is 0; strict comparison silences the upper pair
        let z = StandardizedTimes::new(vec![-1.0, -1.0, 1.0, 1.0]);
        let (out, survive) = temp_relu(&z, RegimeConfig::FAST);
        assert_eq!(out.values, vec![-1.0, -1.0, SILENT, SILENT]);
        assert_eq!(survive, vec![true, true, false, false]);
    }

    #[test]
    fn temp_relu_median_survivor_count() {
        // even count of distinct values at q = 0.5: exactly half survive
        for n in [4usize, 8, 20, 64] {
            let z = StandardizedTimes::new((0..n).map(|i| i as f64 * 0.31 - 2.0).collect());
            let (_, survive) = temp_relu(&z, RegimeConfig::FAST);
            assert_eq!(survive.iter().filter(|&&s| s).count(), n / 2, "n={n}");
        }
    }

    #[test]
    fn temp_relu_keeps_silent_silent() {
        let z = StandardizedTimes::new(vec![0.4, SILENT, -2.0, 1.5]);
        let (out, survive) = temp_relu(&z, RegimeConfig { q: 0.6 });
        assert_eq!(out.values[1], SILENT);
        assert!(!survive[1]);
        // silent entries never come back, non-silent count never grows
        assert!(out.n_valid() <= z.n_valid());
    }

    #[test]
    fn quantile_interpolation() {
        assert!((empirical_quantile(&[-0.5, 0.3], 0.5) - (-0.1)).abs() < 1e-12);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 1.0), 4.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
        assert_eq!(empirical_quantile(&[2.0], 0.25), 2.0);
    }
}
