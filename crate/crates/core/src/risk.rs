//! Per-round training and test errors, the gap processes `U_q` and `T_q`,
//! and per-fold deviations from a reference risk.

use serde::{Deserialize, Serialize};

use crate::data::{risks_over, LossMatrix};
use crate::error::{Error, Result};
use crate::folds::FoldAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub n: usize,
    pub k: usize,
    pub n_t: usize,
    pub n_s: usize,
    /// `train_err[q][j]`: mean loss of hypothesis `j` on round `q`'s training set.
    pub train_err: Vec<Vec<f64>>,
    pub test_err: Vec<Vec<f64>>,
    pub avg_train: Vec<f64>,
    pub avg_test: Vec<f64>,
    /// `U_q = max_j |test_err[q][j] - train_err[q][j]|`.
    pub u: Vec<f64>,
    /// `T_q = U_q - mean(U)`.
    pub t: Vec<f64>,
    pub eu_hat: f64,
}

impl RiskSummary {
    pub fn hypotheses(&self) -> usize {
        self.avg_train.len()
    }
}

fn check_assignment(lm: &LossMatrix, fa: &FoldAssignment) -> Result<()> {
    for r in &fa.rounds {
        lm.validate_indices(&r.test)?;
        lm.validate_indices(&r.train)?;
    }
    Ok(())
}

fn column_average(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.len() as f64;
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        acc.iter_mut().zip(r).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= k);
    acc
}

pub fn compute_risks(lm: &LossMatrix, fa: &FoldAssignment) -> Result<RiskSummary> {
    check_assignment(lm, fa)?;
    let train_err: Vec<Vec<f64>> = fa.rounds.iter().map(|r| risks_over(lm, &r.train)).collect();
    let test_err: Vec<Vec<f64>> = fa.rounds.iter().map(|r| risks_over(lm, &r.test)).collect();
    let u: Vec<f64> = train_err
        .iter()
        .zip(&test_err)
        .map(|(tr, te)| sup_abs_diff(te, tr))
        .collect();
    let eu_hat = u.iter().sum::<f64>() / u.len() as f64;
    let t = u.iter().map(|v| v - eu_hat).collect();
    Ok(RiskSummary {
        n: fa.n,
        k: fa.k,
        n_t: fa.n_t,
        n_s: fa.n_s,
        avg_train: column_average(&train_err),
        avg_test: column_average(&test_err),
        train_err,
        test_err,
        u,
        t,
        eu_hat,
    })
}

pub(crate) fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskReference {
    /// True population risk; needs a generative oracle.
    Population,
    /// Full-sample mean loss as a stand-in for the population risk.
    FullSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSample {
    /// `rho[j] = max_b |mean loss of b on fold j - reference(b)|`.
    pub rho: Vec<f64>,
    pub reference: RiskReference,
}

/// Per-fold deviations over the test folds of `fa`.
///
/// `oracle` carries the population risk per hypothesis and is required
/// when `reference` is [`RiskReference::Population`].
pub fn compute_rho(
    lm: &LossMatrix,
    fa: &FoldAssignment,
    reference: RiskReference,
    oracle: Option<&[f64]>,
) -> Result<RhoSample> {
    check_assignment(lm, fa)?;
    let reference_risk = match reference {
        RiskReference::FullSample => lm.column_means(),
        RiskReference::Population => {
            let o = oracle.ok_or(Error::MissingOracle)?;
            if o.len() != lm.m() {
                return Err(Error::BadParams(format!(
                    "oracle has {} risks for {} hypotheses",
                    o.len(),
                    lm.m()
                )));
            }
            o.to_vec()
        }
    };
    let rho = fa
        .rounds
        .iter()
        .map(|r| sup_abs_diff(&risks_over(lm, &r.test), &reference_risk))
        .collect();
    Ok(RhoSample { rho, reference })
}
