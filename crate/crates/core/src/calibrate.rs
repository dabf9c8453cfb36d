//! Quantile thresholds on the healthy pseudo-OCV difference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{PseudoOcvStream, Sample};
use crate::error::{Error, Result};
use crate::tables::SocLookup;

/// Default tail probability.
pub const DEFAULT_P: f64 = 0.005;
/// Default relaxation factor.
pub const DEFAULT_GAMMA: f64 = 2.0;

/// Empirical `p`-quantile with linear interpolation between order statistics
/// at rank `p * (n - 1)`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// [`quantile`] on data that is already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "must lie in [0, 1]",
        });
    }
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let w = rank - lo as f64;
    Ok(if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    })
}

/// Calibrated detection bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub p: f64,
    pub gamma: f64,
    pub relaxed_minus: f64,
    pub relaxed_plus: f64,
}

impl Thresholds {
    /// Builds thresholds from raw bounds, applying the relaxation factor.
    pub fn from_bounds(theta_minus: f64, theta_plus: f64, p: f64, gamma: f64) -> Result<Self> {
        validate_p_gamma(p, gamma)?;
        if !(theta_minus < 0.0 && theta_plus > 0.0) {
            return Err(Error::DegenerateThresholds {
                theta_minus,
                theta_plus,
            });
        }
        Ok(Self {
            theta_minus,
            theta_plus,
            p,
            gamma,
            relaxed_minus: gamma * theta_minus,
            relaxed_plus: gamma * theta_plus,
        })
    }

    /// Checks the ordering `relaxed- < theta- < 0 < theta+ < relaxed+` and
    /// that the relaxed bounds are `gamma` times the raw ones.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::from_bounds(self.theta_minus, self.theta_plus, self.p, self.gamma)?;
        if rebuilt != *self {
            return Err(Error::InvalidParameter {
                name: "relaxed bounds",
                value: self.relaxed_minus,
                reason: "relaxed bounds must equal gamma times the raw bounds",
            });
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn validate_p_gamma(p: f64, gamma: f64) -> Result<()> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "must lie in (0, 0.5)",
        });
    }
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be > 1",
        });
    }
    Ok(())
}

/// Derives thresholds from a healthy-run difference sequence.
pub fn calibrate_thresholds(healthy_deltas: &[f64], p: f64, gamma: f64) -> Result<Thresholds> {
    validate_p_gamma(p, gamma)?;
    let needed = (1.0 / p).ceil() as usize;
    if healthy_deltas.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: healthy_deltas.len(),
        });
    }
    let mut sorted = healthy_deltas.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let theta_minus = quantile_sorted(&sorted, p)?;
    let theta_plus = quantile_sorted(&sorted, 1.0 - p)?;
    Thresholds::from_bounds(theta_minus, theta_plus, p, gamma)
}

/// Runs the pseudo-OCV path over a healthy stream and returns every
/// first-order difference (one fewer than the number of samples).
pub fn collect_deltas<T: SocLookup>(
    samples: impl IntoIterator<Item = Sample>,
    r0_table: T,
    capacity_ah: f64,
    soc_init: f64,
) -> Result<Vec<f64>> {
    let mut stream = PseudoOcvStream::new(r0_table, capacity_ah, soc_init)?;
    let mut deltas = Vec::new();
    for s in samples {
        if let Some(d) = stream.push(s)?.delta {
            deltas.push(d);
        }
    }
    Ok(deltas)
}

/// Fraction of `deltas` strictly below `lo` and strictly above `hi`.
pub fn exceedance(deltas: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let n = deltas.len() as f64;
    let below = deltas.iter().filter(|&&d| d < lo).count() as f64;
    let above = deltas.iter().filter(|&&d| d > hi).count() as f64;
    (below / n, above / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_quantile() {
        for p in [0.0, 0.3, 1.0] {
            assert_eq!(quantile(&[5.0], p).unwrap(), 5.0);
        }
    }

    #[test]
    fn median_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(quantile(&v, 0.5).unwrap(), 50.5);
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 100.0);
    }

    #[test]
    fn quantile_errors() {
        assert!(matches!(quantile(&[], 0.5), Err(Error::EmptyInput)));
        assert!(quantile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn symmetric_input_gives_symmetric_bounds() {
        let v: Vec<f64> = (-500..=500).map(|k| k as f64 * 1e-5).collect();
        let t = calibrate_thresholds(&v, 0.005, 2.0).unwrap();
        assert!((t.theta_minus + t.theta_plus).abs() < 1e-15);
        assert_eq!(t.relaxed_minus, 2.0 * t.theta_minus);
        assert_eq!(t.relaxed_plus, 2.0 * t.theta_plus);
        t.validate().unwrap();
    }

    #[test]
    fn calibration_errors() {
        let short: Vec<f64> = (0..100)
            .map(|k| if k % 2 == 0 { -1.0 } else { 1.0 })
            .collect();
        assert!(matches!(
            calibrate_thresholds(&short, 0.005, 2.0),
            Err(Error::TooShort {
                needed: 200,
                got: 100
            })
        ));
        let flat = vec![0.0; 1000];
        assert!(matches!(
            calibrate_thresholds(&flat, 0.005, 2.0),
            Err(Error::DegenerateThresholds { .. })
        ));
        let ok: Vec<f64> = (-500..=500).map(f64::from).collect();
        assert!(calibrate_thresholds(&ok, 0.005, 1.0).is_err());
        assert!(calibrate_thresholds(&ok, 0.5, 2.0).is_err());
        assert!(calibrate_thresholds(&ok, 0.0, 2.0).is_err());
    }

    #[test]
    fn thresholds_file_round_trip() {
        let t = Thresholds::from_bounds(-0.003, 0.0031, 0.005, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("thr.json");
        t.save(&path).unwrap();
        assert_eq!(Thresholds::load(&path).unwrap(), t);

        let mut bad = t;
        bad.relaxed_minus = -1.0;
        bad.save(&path).unwrap();
        assert!(Thresholds::load(&path).is_err());
    }
}
