//! Minimax choice of the fold count and hypothesis, plus Monte Carlo
//! estimates of (beta, varpi)-stability.

use serde::{Deserialize, Serialize};

use crate::bounds::{convoluted_bound_iid, convoluted_bound_mixing, BlockRc, BoundConfig, Branch};
use crate::complexity::{averaged_rc, one_round_rc, RcOptions, DEFAULT_DRAWS};
use crate::data::LossMatrix;
use crate::dependence::{autocovariance_profile, MixingModel};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed, Exec};
use crate::folds::{blocked_kfold, random_kfold, FoldAssignment};
use crate::risk::{compute_rho, compute_risks, sup_abs_diff, RiskReference};
use crate::stats::{wilson, Z95};
use crate::tails::{build_tail_profile, TailClass, TailConfig, TailProfile};
use crate::verify::Generator;

/// `{2, .., min(n, 50)}` followed by `n` (leave-one-out).
pub fn default_k_grid(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (2..=n.min(50)).collect();
    if n > 50 {
        ks.push(n);
    }
    ks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    /// Must be one of the convoluted modes.
    pub bound: BoundConfig,
    pub tail: TailConfig,
    /// Candidate fold counts; empty means [`default_k_grid`].
    pub k_values: Vec<usize>,
    pub rc_draws: usize,
    pub seed: u64,
    /// Block pairs per side for the mixing mode.
    pub mu: usize,
    pub mixing: MixingModel,
    pub exec: Exec,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            bound: BoundConfig::default(),
            tail: TailConfig::default(),
            k_values: Vec::new(),
            rc_draws: DEFAULT_DRAWS,
            seed: 0,
            mu: 2,
            mixing: MixingModel::Independent,
            exec: Exec::default(),
        }
    }
}

impl SelectConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.bound.validate()?;
        if !self.bound.mode.is_convoluted() {
            return Err(Error::BadParams(
                "fold-count selection needs a convoluted bound mode".into(),
            ));
        }
        if self.rc_draws == 0 {
            return Err(Error::BadParams("rc_draws must be at least 1".into()));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k < 2 || k > n) {
            return Err(Error::BadK { k, n });
        }
        self.mixing.validate()
    }

    fn grid(&self, n: usize) -> Vec<usize> {
        let mut ks = if self.k_values.is_empty() {
            default_k_grid(n)
        } else {
            self.k_values.clone()
        };
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// One fold count of the bound curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    pub branch: Option<Branch>,
    /// Scale entering the penalty: the envelope, `sigma_tilde` or the
    /// psi_1 norm depending on the branch.
    pub sigma_term: Option<f64>,
    pub rc: Option<f64>,
    pub varsigma: Option<f64>,
    pub kappa: Option<f64>,
    pub confidence: f64,
    pub rhs_min: Option<f64>,
    pub argmin_b: Option<usize>,
    pub autocov_time: Option<f64>,
    pub feasible: bool,
    pub reason: Option<String>,
    /// Full per-hypothesis right-hand side when feasible.
    #[serde(skip)]
    pub rhs: Option<Vec<f64>>,
}

impl CurveRow {
    fn failed(k: usize, reason: String) -> Self {
        Self {
            k,
            branch: None,
            sigma_term: None,
            rc: None,
            varsigma: None,
            kappa: None,
            confidence: 0.0,
            rhs_min: None,
            argmin_b: None,
            autocov_time: None,
            feasible: false,
            reason: Some(reason),
            rhs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub k_star: usize,
    pub b_star: usize,
    pub b_star_label: String,
    pub rhs_star: f64,
    pub confidence: f64,
    pub seed: u64,
    pub curve: Vec<CurveRow>,
    pub infeasible_ks: Vec<(usize, String)>,
}

/// The split used for fold count `k` under `cfg`.
pub fn fold_assignment_for(n: usize, k: usize, cfg: &SelectConfig) -> Result<FoldAssignment> {
    if cfg.bound.mode.is_mixing() {
        Ok(blocked_kfold(n, k, cfg.mu)?.folds)
    } else {
        random_kfold(n, k, derive_seed(cfg.seed, k as u64))
    }
}

fn sigma_term(profile: &TailProfile) -> Option<f64> {
    match profile.tail_class {
        TailClass::Bounded => profile.envelope,
        TailClass::Subgaussian => Some(profile.sigma_tilde),
        TailClass::Subexponential => profile.psi1,
    }
}

fn evaluate(lm: &LossMatrix, k: usize, cfg: &SelectConfig) -> Result<CurveRow> {
    let n = lm.n();
    let seed_k = derive_seed(cfg.seed, k as u64);
    // Folds are sequential inside a task; the K-scan owns the parallelism.
    let rc_opts = RcOptions::new(cfg.rc_draws, derive_seed(seed_k, 1)).with_exec(Exec::Sequential);
    let (bound, dep, sigma) = if cfg.bound.mode.is_mixing() {
        let bf = blocked_kfold(n, k, cfg.mu)?;
        let rs = compute_risks(lm, &bf.folds)?;
        let dep = autocovariance_profile(&rs.t)?;
        let train: Vec<_> = (0..k).map(|q| bf.train_family0(q)).collect();
        let test: Vec<_> = (0..k).map(|q| bf.test_family0(q)).collect();
        let rc = BlockRc {
            train: averaged_rc(lm, &train, rc_opts)?,
            test: averaged_rc(lm, &test, rc_opts)?,
        };
        let envelope = lm.envelope().map(|e| e.value);
        let b = convoluted_bound_mixing(&rs, &rc, &dep, &bf.layout, &cfg.mixing, envelope, &cfg.bound)?;
        (b, dep, envelope)
    } else {
        let fa = random_kfold(n, k, seed_k)?;
        let rs = compute_risks(lm, &fa)?;
        let dep = autocovariance_profile(&rs.t)?;
        let rho = compute_rho(lm, &fa, RiskReference::FullSample, None)?;
        let profile = build_tail_profile(&rho, lm, &cfg.tail)?;
        let rc = one_round_rc(lm, &fa, rc_opts)?;
        let b = convoluted_bound_iid(&rs, &rc, &profile, &dep, &cfg.bound)?;
        (b, dep, sigma_term(&profile))
    };
    let argmin = bound.argmin();
    Ok(CurveRow {
        k,
        branch: Some(bound.branch),
        sigma_term: sigma,
        rc: Some(bound.rc_term / 2.0),
        varsigma: Some(bound.varsigma),
        kappa: bound.kappa,
        confidence: bound.confidence,
        rhs_min: argmin.map(|a| a.1),
        argmin_b: argmin.map(|a| a.0),
        autocov_time: Some(dep.v),
        feasible: bound.feasible,
        reason: bound.reason.clone(),
        rhs: bound.rhs,
    })
}

/// Evaluates the convoluted bound at every candidate K. Failures at a given
/// K (indivisible blocks, infeasible mixing window, ...) become infeasible
/// rows rather than errors.
pub fn scan_curve(lm: &LossMatrix, cfg: &SelectConfig) -> Result<Vec<CurveRow>> {
    let n = lm.n();
    cfg.validate(n)?;
    let ks = cfg.grid(n);
    Ok(map_indexed(cfg.exec, ks.len(), |i| {
        let k = ks[i];
        evaluate(lm, k, cfg).unwrap_or_else(|e| CurveRow::failed(k, e.to_string()))
    }))
}

/// Minimum over feasible rows; ties go to the smaller K, then the smaller
/// hypothesis index.
pub fn select_from_curve(curve: &[CurveRow]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for row in curve.iter().filter(|r| r.feasible) {
        let (Some(b), Some(v)) = (row.argmin_b, row.rhs_min) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((k, bb, bv)) => v < bv || (v == bv && (row.k, b) < (k, bb)),
        };
        if better {
            best = Some((row.k, b, v));
        }
    }
    best
}

pub fn select_k(lm: &LossMatrix, cfg: &SelectConfig) -> Result<SelectionResult> {
    let curve = scan_curve(lm, cfg)?;
    summarize_curve(lm, curve, cfg.seed)
}

/// Picks `(K*, b*)` from an already evaluated curve.
pub fn summarize_curve(lm: &LossMatrix, curve: Vec<CurveRow>, seed: u64) -> Result<SelectionResult> {
    let infeasible_ks: Vec<(usize, String)> = curve
        .iter()
        .filter(|r| !r.feasible)
        .map(|r| (r.k, r.reason.clone().unwrap_or_else(|| "infeasible".into())))
        .collect();
    let Some((k_star, b_star, rhs_star)) = select_from_curve(&curve) else {
        return Err(Error::NoFeasibleK(infeasible_ks));
    };
    let confidence = curve
        .iter()
        .find(|r| r.k == k_star)
        .map(|r| r.confidence)
        .unwrap_or(0.0);
    Ok(SelectionResult {
        k_star,
        b_star,
        b_star_label: lm.labels()[b_star].clone(),
        rhs_star,
        confidence,
        seed,
        curve,
        infeasible_ks,
    })
}

/// Where the replications for a stability estimate come from.
#[derive(Debug, Clone, Copy)]
pub enum StabilitySource<'a> {
    /// Re-split one fixed loss matrix.
    Resample(&'a LossMatrix),
    /// Fresh sample of size `n` per replication, then a fresh split.
    Simulate { generator: &'a Generator, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub k: usize,
    pub beta: f64,
    pub varpi: f64,
    pub trials: usize,
    pub seed: u64,
    /// Wilson intervals wider than this are rejected.
    pub max_width: f64,
    pub exec: Exec,
}

impl StabilityConfig {
    pub fn new(k: usize, beta: f64, varpi: f64, trials: usize, seed: u64) -> Self {
        Self {
            k,
            beta,
            varpi,
            trials,
            seed,
            max_width: 0.25,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub count: usize,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub verdict: Verdict,
}

impl Exceedance {
    fn new(count: usize, trials: usize, varpi: f64) -> Self {
        let (lo, hi) = wilson(count, trials, Z95);
        let verdict = if hi <= varpi {
            Verdict::Stable
        } else if lo > varpi {
            Verdict::Unstable
        } else {
            Verdict::Inconclusive
        };
        Self {
            count,
            frequency: count as f64 / trials as f64,
            wilson_low: lo,
            wilson_high: hi,
            verdict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub trials: usize,
    /// `sup_b |train - test|` on the first round reaching `beta`.
    pub one_round: Exceedance,
    /// The same for the K-round averages.
    pub average: Exceedance,
}

/// Estimates both stability probabilities by replication and compares the
/// Wilson interval of each exceedance frequency with `varpi`.
pub fn check_stability(source: StabilitySource<'_>, cfg: &StabilityConfig) -> Result<StabilityReport> {
    if cfg.trials == 0 {
        return Err(Error::InsufficientTrials {
            trials: 0,
            width: 1.0,
            cap: cfg.max_width,
        });
    }
    if !(cfg.varpi > 0.0 && cfg.varpi <= 1.0) || !(cfg.beta >= 0.0) {
        return Err(Error::BadParams(format!(
            "need beta >= 0 and varpi in (0, 1], got {}, {}",
            cfg.beta, cfg.varpi
        )));
    }
    let hits = map_indexed(cfg.exec, cfg.trials, |t| -> Result<(bool, bool)> {
        let seed = derive_seed(cfg.seed, t as u64);
        let sample;
        let lm = match source {
            StabilitySource::Resample(lm) => lm,
            StabilitySource::Simulate { generator, n } => {
                sample = generator.sample(n, derive_seed(seed, 0))?;
                &sample.losses
            }
        };
        let fa = random_kfold(lm.n(), cfg.k, derive_seed(seed, 1))?;
        let rs = compute_risks(lm, &fa)?;
        Ok((
            rs.u[0] >= cfg.beta,
            sup_abs_diff(&rs.avg_train, &rs.avg_test) >= cfg.beta,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let one = hits.iter().filter(|h| h.0).count();
    let avg = hits.iter().filter(|h| h.1).count();
    let report = StabilityReport {
        trials: cfg.trials,
        one_round: Exceedance::new(one, cfg.trials, cfg.varpi),
        average: Exceedance::new(avg, cfg.trials, cfg.varpi),
    };
    let width = (report.one_round.wilson_high - report.one_round.wilson_low)
        .max(report.average.wilson_high - report.average.wilson_low);
    if width > cfg.max_width {
        return Err(Error::InsufficientTrials {
            trials: cfg.trials,
            width,
            cap: cfg.max_width,
        });
    }
    Ok(report)
}
