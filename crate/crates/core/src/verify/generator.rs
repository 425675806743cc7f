use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complexity::mean_and_std_err;
use crate::data::{build_loss_matrix, Dataset, LossKind, LossMatrix, LossSpec, ModelClass, Ordering};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed, rng, Exec};
use crate::stats::{normal_cdf, normal_pdf};

/// Synthetic sources with known population risks.
///
/// Loss-level kinds emit `classes` independent, identically distributed
/// loss columns directly. `Ar1` emits indicator losses `1{X_t > c_j}` of a
/// stationary Gaussian AR(1) path, one column per threshold. `LinearModel`
/// emits a regression dataset scored with squared loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    BoundedUniform {
        m: f64,
        classes: usize,
    },
    /// Normal losses truncated to `[0, inf)` by rejection.
    GaussianLoss {
        mean: f64,
        sd: f64,
        classes: usize,
    },
    ExponentialLoss {
        rate: f64,
        classes: usize,
    },
    Ar1 {
        phi: f64,
        noise_sd: f64,
        thresholds: Vec<f64>,
    },
    LinearModel {
        b_true: Vec<f64>,
        noise_sd: f64,
        /// Standard deviations of independent Gaussian predictors.
        design_sd: Vec<f64>,
        hypotheses: Vec<Vec<f64>>,
    },
}

/// One draw from a generator.
#[derive(Debug, Clone)]
pub struct Sample {
    pub losses: LossMatrix,
    pub dataset: Option<Dataset>,
    /// The underlying path for sequential generators.
    pub series: Option<Vec<f64>>,
}

impl Generator {
    pub fn ar1(phi: f64, noise_sd: f64) -> Self {
        Generator::Ar1 {
            phi,
            noise_sd,
            thresholds: vec![-0.5, 0.0, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadParams(msg));
        match self {
            Generator::BoundedUniform { m, classes } => {
                if !(*m > 0.0 && m.is_finite()) || *classes == 0 {
                    return bad(format!(
                        "bounded_uniform needs m > 0 and classes >= 1, got {m}, {classes}"
                    ));
                }
            }
            Generator::GaussianLoss { mean, sd, classes } => {
                if !mean.is_finite() || !(*sd > 0.0 && sd.is_finite()) || *classes == 0 {
                    return bad("gaussian_loss needs finite mean, sd > 0, classes >= 1".to_string());
                }
            }
            Generator::ExponentialLoss { rate, classes } => {
                if !(*rate > 0.0 && rate.is_finite()) || *classes == 0 {
                    return bad("exponential_loss needs rate > 0 and classes >= 1".to_string());
                }
            }
            Generator::Ar1 {
                phi,
                noise_sd,
                thresholds,
            } => {
                if !(phi.abs() < 1.0) {
                    return bad(format!("ar1 needs |phi| < 1 for stationarity, got {phi}"));
                }
                if !(*noise_sd > 0.0 && noise_sd.is_finite()) {
                    return bad(format!("ar1 needs noise_sd > 0, got {noise_sd}"));
                }
                if thresholds.is_empty() || thresholds.iter().any(|t| !t.is_finite()) {
                    return bad("ar1 needs at least one finite threshold".into());
                }
            }
            Generator::LinearModel {
                b_true,
                noise_sd,
                design_sd,
                hypotheses,
            } => {
                if b_true.is_empty() || b_true.len() != design_sd.len() {
                    return bad("linear_model needs b_true and design_sd of equal, non-zero length".into());
                }
                if !(*noise_sd >= 0.0) || design_sd.iter().any(|s| !(*s >= 0.0)) {
                    return bad("linear_model standard deviations must be >= 0".into());
                }
                ModelClass::new(hypotheses.clone(), None)?;
                if hypotheses[0].len() != b_true.len() {
                    return bad("hypotheses must match the dimension of b_true".into());
                }
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        match self {
            Generator::BoundedUniform { classes, .. }
            | Generator::GaussianLoss { classes, .. }
            | Generator::ExponentialLoss { classes, .. } => *classes,
            Generator::Ar1 { thresholds, .. } => thresholds.len(),
            Generator::LinearModel { hypotheses, .. } => hypotheses.len(),
        }
    }

    /// Certified bound on every loss the generator can emit.
    pub fn envelope(&self) -> Option<f64> {
        match self {
            Generator::BoundedUniform { m, .. } => Some(*m),
            Generator::Ar1 { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn is_sequential(&self) -> bool {
        matches!(self, Generator::Ar1 { .. })
    }

    /// Population risk of each hypothesis, in closed form.
    pub fn true_risk(&self) -> Vec<f64> {
        match self {
            Generator::BoundedUniform { m, classes } => vec![m / 2.0; *classes],
            Generator::GaussianLoss { mean, sd, classes } => {
                let alpha = -mean / sd;
                vec![mean + sd * normal_pdf(alpha) / (1.0 - normal_cdf(alpha)); *classes]
            }
            Generator::ExponentialLoss { rate, classes } => vec![1.0 / rate; *classes],
            Generator::Ar1 { thresholds, .. } => {
                let s = self.stationary_sd();
                thresholds.iter().map(|c| 1.0 - normal_cdf(c / s)).collect()
            }
            Generator::LinearModel {
                b_true,
                noise_sd,
                design_sd,
                hypotheses,
            } => hypotheses
                .iter()
                .map(|b| {
                    let bias: f64 = b
                        .iter()
                        .zip(b_true)
                        .zip(design_sd)
                        .map(|((b, t), s)| s * s * (b - t).powi(2))
                        .sum();
                    bias + noise_sd * noise_sd
                })
                .collect(),
        }
    }

    fn stationary_sd(&self) -> f64 {
        match self {
            Generator::Ar1 { phi, noise_sd, .. } => noise_sd / (1.0 - phi * phi).sqrt(),
            _ => f64::NAN,
        }
    }

    /// Autocovariances `gamma_0..gamma_{lags-1}` of the underlying AR(1) path.
    pub fn true_gammas(&self, lags: usize) -> Option<Vec<f64>> {
        match self {
            Generator::Ar1 { phi, .. } => {
                let g0 = self.stationary_sd().powi(2);
                Some((0..lags).map(|l| g0 * phi.powi(l as i32)).collect())
            }
            _ => None,
        }
    }

    /// A path of length `len`: the AR(1) process itself, or the first loss
    /// column for i.i.d. loss kinds.
    pub fn series(&self, len: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut r = rng(seed);
        match self {
            Generator::Ar1 { phi, noise_sd, .. } => Ok(ar1_path(*phi, *noise_sd, len, &mut r)),
            Generator::LinearModel { .. } => Err(Error::BadParams("linear_model has no scalar path".into())),
            _ => Ok((0..len).map(|_| self.draw_loss(&mut r)).collect()),
        }
    }

    fn draw_loss<R: Rng>(&self, r: &mut R) -> f64 {
        match self {
            Generator::BoundedUniform { m, .. } => r.random::<f64>() * m,
            Generator::GaussianLoss { mean, sd, .. } => {
                let normal = Normal::new(*mean, *sd).expect("validated");
                loop {
                    let v = normal.sample(r);
                    if v >= 0.0 {
                        break v;
                    }
                }
            }
            Generator::ExponentialLoss { rate, .. } => Exp::new(*rate).expect("validated").sample(r),
            _ => unreachable!("not an i.i.d. loss generator"),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        if n == 0 {
            return Err(Error::BadParams("sample size must be at least 1".into()));
        }
        self.validate()?;
        let mut r = rng(seed);
        match self {
            Generator::Ar1 {
                phi,
                noise_sd,
                thresholds,
            } => {
                let path = ar1_path(*phi, *noise_sd, n, &mut r);
                let rows = path
                    .iter()
                    .map(|x| thresholds.iter().map(|c| f64::from(u8::from(x > c))).collect())
                    .collect();
                Ok(Sample {
                    losses: LossMatrix::from_rows(rows, Some(1.0))?,
                    dataset: None,
                    series: Some(path),
                })
            }
            Generator::LinearModel {
                b_true,
                noise_sd,
                design_sd,
                hypotheses,
            } => {
                let mut y = Vec::with_capacity(n);
                let mut rows = Vec::with_capacity(n);
                for _ in 0..n {
                    let x: Vec<f64> = design_sd
                        .iter()
                        .map(|s| s * r.sample::<f64, _>(StandardNormal))
                        .collect();
                    let signal: f64 = x.iter().zip(b_true).map(|(a, b)| a * b).sum();
                    y.push(signal + noise_sd * r.sample::<f64, _>(StandardNormal));
                    rows.push(x);
                }
                let data = Dataset::new(y, rows, Ordering::Exchangeable)?;
                let model = ModelClass::new(hypotheses.clone(), None)?;
                let losses = build_loss_matrix(&data, &LossSpec::new(LossKind::Squared), &model)?;
                Ok(Sample {
                    losses,
                    dataset: Some(data),
                    series: None,
                })
            }
            _ => {
                let m = self.classes();
                let values: Vec<f64> = (0..n * m).map(|_| self.draw_loss(&mut r)).collect();
                Ok(Sample {
                    losses: LossMatrix::from_flat(n, m, values, self.envelope())?,
                    dataset: None,
                    series: None,
                })
            }
        }
    }

    /// Compares every closed-form quantity with a long-run Monte Carlo
    /// estimate over `draws` points (split into independent replications).
    pub fn self_test(&self, draws: usize, seed: u64, exec: Exec) -> Result<SelfTest> {
        self.validate()?;
        const REPS: usize = 200;
        let len = (draws / REPS).max(10);
        let lags = 4;
        // Each replication reports per-hypothesis mean loss and, for paths,
        // autocovariances about the known zero mean.
        let reps: Vec<Result<(Vec<f64>, Vec<f64>)>> = map_indexed(exec, REPS, |rep| {
            let s = self.sample(len, derive_seed(seed, rep as u64))?;
            let risks = s.losses.column_means();
            let gammas = match &s.series {
                Some(path) => (0..lags)
                    .map(|l| {
                        path[..len - l]
                            .iter()
                            .zip(&path[l..])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            / (len - l) as f64
                    })
                    .collect(),
                None => Vec::new(),
            };
            Ok((risks, gammas))
        });
        let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
        let mut checks = Vec::new();
        for (j, expected) in self.true_risk().into_iter().enumerate() {
            let xs: Vec<f64> = reps.iter().map(|(r, _)| r[j]).collect();
            checks.push(Check::new(format!("risk[{j}]"), expected, &xs));
        }
        if let Some(gammas) = self.true_gammas(lags) {
            for (l, expected) in gammas.into_iter().enumerate() {
                let xs: Vec<f64> = reps.iter().map(|(_, g)| g[l]).collect();
                checks.push(Check::new(format!("gamma[{l}]"), expected, &xs));
            }
        }
        Ok(SelfTest { checks })
    }
}

/// Stationary Gaussian AR(1) path with `X_0 ~ N(0, sd^2 / (1 - phi^2))`.
pub(crate) fn ar1_path<R: Rng>(phi: f64, noise_sd: f64, len: usize, r: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let mut x = noise_sd / (1.0 - phi * phi).sqrt() * r.sample::<f64, _>(StandardNormal);
    out.push(x);
    for _ in 1..len {
        x = phi * x + noise_sd * r.sample::<f64, _>(StandardNormal);
        out.push(x);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub estimate: f64,
    pub std_err: f64,
    /// Within four standard errors.
    pub pass: bool,
}

impl Check {
    fn new(name: String, expected: f64, replications: &[f64]) -> Self {
        let (estimate, std_err) = mean_and_std_err(replications);
        Self {
            name,
            expected,
            estimate,
            std_err,
            pass: (estimate - expected).abs() <= 4.0 * std_err.max(1e-12),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTest {
    pub checks: Vec<Check>,
}

impl SelfTest {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
