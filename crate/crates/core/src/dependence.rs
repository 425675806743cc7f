//! Autocovariance of the gap process, the Chebyshev inequality for
//! stationary dependent sequences, and beta-mixing decay models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceProfile {
    /// Biased sample autocovariances for lags `0..K`.
    pub gamma: Vec<f64>,
    pub gamma0: f64,
    /// Normalised autocovariance time `sum_{l>=1} |gamma_l| / gamma_0`.
    pub v: f64,
    /// Set when the series is constant; `v` is then 0.
    pub degenerate: bool,
}

/// Autocovariances with the common `1/K` denominator, which keeps the
/// sequence positive semidefinite and `|gamma_l| <= gamma_0`.
pub fn autocovariance_profile(series: &[f64]) -> Result<DependenceProfile> {
    let k = series.len();
    if k < 2 {
        return Err(Error::BadParams(format!(
            "need at least two observations, got {k}"
        )));
    }
    let mean = series.iter().sum::<f64>() / k as f64;
    let centered: Vec<f64> = series.iter().map(|t| t - mean).collect();
    let gamma: Vec<f64> = (0..k)
        .map(|l| {
            centered[..k - l]
                .iter()
                .zip(&centered[l..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / k as f64
        })
        .collect();
    let gamma0 = gamma[0];
    let degenerate = gamma0 <= 0.0;
    let v = if degenerate {
        0.0
    } else {
        autocovariance_time(&gamma)
    };
    Ok(DependenceProfile {
        gamma,
        gamma0: gamma0.max(0.0),
        v,
        degenerate,
    })
}

/// `sum_{l=1}^{len-1} |gamma_l| / gamma_0` for a given autocovariance sequence.
pub fn autocovariance_time(gamma: &[f64]) -> f64 {
    if gamma.is_empty() || gamma[0] <= 0.0 {
        return 0.0;
    }
    gamma[1..].iter().map(|g| g.abs()).sum::<f64>() / gamma[0]
}

/// Lower bound on `Pr(|mean - E| <= eps)` for `n` observations of a
/// stationary sequence with variance `gamma0` and autocovariance time `v`.
pub fn chebyshev_lower_bound(gamma0: f64, v: f64, n: usize, eps: f64) -> f64 {
    (1.0 - gamma0 * (1.0 + 2.0 * v) / (eps * eps * n as f64)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingModel {
    /// `beta_a = beta0 * r^a`
    Exponential { beta0: f64, r: f64 },
    /// `beta_a = beta0 * a^(-r)`
    Algebraic { beta0: f64, r: f64 },
    /// `beta_a = values[a - 1]`
    Table { values: Vec<f64> },
    /// Independent data.
    Independent,
}

impl MixingModel {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            MixingModel::Exponential { beta0, r } => {
                if !in_unit(*beta0) || !in_unit(*r) {
                    return Err(Error::BadParams(format!(
                        "exponential mixing needs beta0, r in [0, 1], got {beta0}, {r}"
                    )));
                }
            }
            MixingModel::Algebraic { beta0, r } => {
                if !in_unit(*beta0) || !(*r >= 0.0 && r.is_finite()) {
                    return Err(Error::BadParams(format!(
                        "algebraic mixing needs beta0 in [0, 1] and r >= 0, got {beta0}, {r}"
                    )));
                }
            }
            MixingModel::Table { values } => {
                if values.is_empty() || !values.iter().all(|&v| in_unit(v)) {
                    return Err(Error::BadParams("mixing table entries must lie in [0, 1]".into()));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::BadParams("mixing table must be non-increasing".into()));
                }
            }
            MixingModel::Independent => {}
        }
        Ok(())
    }
}

/// Mixing coefficient at gap `a >= 1`.
pub fn mixing_beta(model: &MixingModel, a: usize) -> Result<f64> {
    if a == 0 {
        return Err(Error::BadParams("block length must be at least 1".into()));
    }
    model.validate()?;
    Ok(match model {
        MixingModel::Exponential { beta0, r } => beta0 * r.powi(a as i32),
        MixingModel::Algebraic { beta0, r } => beta0 * (a as f64).powf(-r),
        MixingModel::Table { values } => *values
            .get(a - 1)
            .ok_or(Error::OutOfTableRange { a, len: values.len() })?,
        MixingModel::Independent => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_degenerate() {
        let p = autocovariance_profile(&[0.0; 4]).unwrap();
        assert_eq!(p.gamma0, 0.0);
        assert_eq!(p.v, 0.0);
        assert!(p.degenerate);
    }

    #[test]
    fn alternating_series() {
        let p = autocovariance_profile(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        let expected = [1.0, -0.75, 0.5, -0.25];
        for (g, e) in p.gamma.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
        assert!((p.v - 1.5).abs() < 1e-15);
        assert!(!p.degenerate);
    }

    #[test]
    fn lag_zero_is_mean_square_deviation() {
        let s = [2.0, 5.0, -1.0, 0.5, 3.0];
        let m = s.iter().sum::<f64>() / 5.0;
        let msd = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 5.0;
        assert_eq!(autocovariance_profile(&s).unwrap().gamma0, msd);
    }

    #[test]
    fn too_short() {
        assert!(autocovariance_profile(&[1.0]).is_err());
    }

    #[test]
    fn chebyshev_examples() {
        assert!((chebyshev_lower_bound(1.0, 0.0, 100, 0.5) - 0.96).abs() < 1e-15);
        assert!((chebyshev_lower_bound(1.0, 1.0, 100, 0.5) - 0.88).abs() < 1e-15);
        assert_eq!(chebyshev_lower_bound(1.0, 1.0, 100, 1e-3), 0.0);
    }

    #[test]
    fn mixing_examples() {
        let exp = MixingModel::Exponential { beta0: 0.5, r: 0.5 };
        assert_eq!(mixing_beta(&exp, 1).unwrap(), 0.25);
        let alg = MixingModel::Algebraic { beta0: 1.0, r: 2.0 };
        assert!((mixing_beta(&alg, 10).unwrap() - 0.01).abs() < 1e-15);
        let mut prev = 1.0;
        for a in 1..200 {
            let b = mixing_beta(&exp, a).unwrap();
            assert!(b <= prev);
            prev = b;
        }
        assert!(prev < 1e-50);
        let table = MixingModel::Table {
            values: vec![0.4, 0.2],
        };
        assert_eq!(mixing_beta(&table, 2).unwrap(), 0.2);
        assert_eq!(
            mixing_beta(&table, 3).unwrap_err(),
            Error::OutOfTableRange { a: 3, len: 2 }
        );
        assert!(mixing_beta(
            &MixingModel::Table {
                values: vec![0.1, 0.2]
            },
            1
        )
        .is_err());
    }
}
