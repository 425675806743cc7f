use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    convoluted_bound_iid, convoluted_bound_mixing, lemma_a1_ratio, one_round_bound_iid,
    one_round_bound_mixing, BlockRc, BoundConfig, BoundMode, BoundResult, DEFAULT_A1_SLACK,
};
use crate::complexity::{averaged_rc, one_round_rc, per_fold_rc, rademacher_complexity_with, RcOptions};
use crate::dependence::{
    autocovariance_profile, autocovariance_time, chebyshev_lower_bound, mixing_beta, MixingModel,
};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed, Exec};
use crate::folds::{blocked_kfold, random_kfold, SideBlocks};
use crate::risk::{compute_rho, compute_risks, RiskReference};
use crate::stats::{proportion_se, wilson, Proportion, Z95};
use crate::tails::{build_tail_profile, estimate_orlicz_norm, TailConfig};

use super::blocks::{independent_blocks_redraw, original_blocks};
use super::Generator;

pub const MIN_TRIALS: usize = 500;

/// Which inequality a coverage run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// One-round bound, i.i.d. data.
    #[serde(rename = "1")]
    OneRound,
    /// K-average bound, i.i.d. data.
    #[serde(rename = "2")]
    Convoluted,
    /// One-round bound, beta-mixing data.
    #[serde(rename = "4")]
    MixingOneRound,
    /// K-average bound, beta-mixing data.
    #[serde(rename = "5")]
    MixingConvoluted,
    /// Chebyshev inequality for stationary sequences.
    #[serde(rename = "lemma1")]
    Lemma1,
    /// Variance ratio of the gap process to the fold deviation norm.
    #[serde(rename = "lemmaA1")]
    LemmaA1,
    /// Block-approximation error of the independent-blocks coupling.
    #[serde(rename = "yu")]
    Yu,
}

impl Theorem {
    pub const ALL: [Theorem; 7] = [
        Theorem::OneRound,
        Theorem::Convoluted,
        Theorem::MixingOneRound,
        Theorem::MixingConvoluted,
        Theorem::Lemma1,
        Theorem::LemmaA1,
        Theorem::Yu,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Theorem::OneRound => "1",
            Theorem::Convoluted => "2",
            Theorem::MixingOneRound => "4",
            Theorem::MixingConvoluted => "5",
            Theorem::Lemma1 => "lemma1",
            Theorem::LemmaA1 => "lemmaA1",
            Theorem::Yu => "yu",
        }
    }

    pub fn valid_tags() -> String {
        Self::ALL.iter().map(|t| t.tag()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == s).ok_or_else(|| {
            Error::BadParams(format!(
                "unknown theorem tag '{s}'; valid tags: {}",
                Self::valid_tags()
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub n: usize,
    pub k: usize,
    pub mu: usize,
    /// Block length for the block-approximation check.
    pub block_len: usize,
    pub varpi: f64,
    pub c: f64,
    pub tail: TailConfig,
    pub rc_draws: usize,
    pub trials: usize,
    pub seed: u64,
    pub mixing: MixingModel,
    /// Deviation levels for the Chebyshev check.
    pub eps_grid: Vec<f64>,
    pub a1_slack: f64,
    /// Required fraction of replications satisfying the ratio bound.
    pub a1_quantile: f64,
    pub confidence_floor: f64,
    pub exec: Exec,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            n: 200,
            k: 5,
            mu: 2,
            block_len: 4,
            varpi: 0.1,
            c: 1.0,
            tail: TailConfig::default(),
            rc_draws: 256,
            trials: 2000,
            seed: 0,
            mixing: MixingModel::Independent,
            eps_grid: (2..=11).map(|i| i as f64 / 10.0).collect(),
            a1_slack: DEFAULT_A1_SLACK,
            a1_quantile: 0.99,
            confidence_floor: 0.0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub eps: f64,
    pub empirical: f64,
    pub bound: f64,
    pub std_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    pub generator: Generator,
    #[serde(flatten)]
    pub config: CoverageConfig,
}

/// Outcome of a coverage run.
///
/// For the bound theorems `frequency` is the violation rate among feasible
/// trials and `target` the failure mass the bound promises (`varpi`, or the
/// mean `kappa`). `pass` requires `frequency <= target + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub theorem: Theorem,
    pub params: CoverageParams,
    pub trials: usize,
    pub feasible_trials: usize,
    pub infeasible: usize,
    pub violations: usize,
    pub frequency: f64,
    pub target: f64,
    pub tolerance: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, Copy)]
enum Trial {
    Infeasible,
    Feasible { violated: bool, kappa: Option<f64> },
}

fn infeasible_kind(e: &Error) -> bool {
    matches!(
        e,
        Error::InfeasibleMixing { .. }
            | Error::InfeasibleWindow { .. }
            | Error::ZeroNorm
            | Error::NoFiniteNorm { .. }
            | Error::UndefinedAtVarpiOne
    )
}

fn classify(result: Result<BoundResult>, violated: impl FnOnce(&[f64]) -> bool) -> Result<Trial> {
    match result {
        Ok(b) => match &b.rhs {
            Some(rhs) if b.feasible => Ok(Trial::Feasible {
                violated: violated(rhs),
                kappa: b.kappa,
            }),
            _ => Ok(Trial::Infeasible),
        },
        Err(e) if infeasible_kind(&e) => Ok(Trial::Infeasible),
        Err(e) => Err(e),
    }
}

fn exceeds(actual: &[f64], rhs: &[f64]) -> bool {
    actual.iter().zip(rhs).any(|(a, r)| a > r)
}

/// Runs `cfg.trials` independent replications of the chosen inequality on
/// fresh samples from `gen` and reports its empirical coverage.
pub fn coverage_trial(gen: &Generator, theorem: Theorem, cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.trials < MIN_TRIALS {
        return Err(Error::BadParams(format!(
            "coverage needs at least {MIN_TRIALS} trials, got {}",
            cfg.trials
        )));
    }
    gen.validate()?;
    cfg.mixing.validate()?;
    match theorem {
        Theorem::Lemma1 => return lemma1(gen, cfg),
        Theorem::Yu => return block_approximation(gen, cfg),
        Theorem::LemmaA1 => return ratio_a1(gen, cfg),
        _ => {}
    }
    if (theorem == Theorem::MixingOneRound || theorem == Theorem::MixingConvoluted) && !gen.is_sequential() {
        return Err(Error::BadParams(format!(
            "theorem {theorem} needs a sequential generator"
        )));
    }
    let bound_cfg = BoundConfig {
        varpi: cfg.varpi,
        confidence_floor: cfg.confidence_floor,
        c: cfg.c,
        mode: match theorem {
            Theorem::OneRound => BoundMode::IidOneRound,
            Theorem::Convoluted => BoundMode::IidConvoluted,
            Theorem::MixingOneRound => BoundMode::MixingOneRound,
            _ => BoundMode::MixingConvoluted,
        },
    };
    bound_cfg.validate()?;

    let outcomes = map_indexed(cfg.exec, cfg.trials, |t| {
        let seed = derive_seed(cfg.seed, t as u64);
        bound_trial(gen, theorem, cfg, &bound_cfg, seed)
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut violations = 0;
    let mut feasible = 0;
    let mut kappa_sum = 0.0;
    for o in &outcomes {
        if let Trial::Feasible { violated, kappa } = *o {
            feasible += 1;
            violations += usize::from(violated);
            kappa_sum += kappa.unwrap_or(cfg.varpi);
        }
    }
    let target = if feasible == 0 {
        0.0
    } else {
        kappa_sum / feasible as f64
    };
    let tolerance = 2.0 * proportion_se(target, feasible);
    let p = Proportion::new(violations, feasible);
    Ok(CoverageReport {
        theorem,
        params: params(gen, cfg),
        trials: cfg.trials,
        feasible_trials: feasible,
        infeasible: cfg.trials - feasible,
        violations,
        frequency: p.frequency,
        target,
        tolerance,
        wilson_low: p.wilson_low,
        wilson_high: p.wilson_high,
        pass: feasible > 0 && p.frequency <= target + tolerance,
        grid: Vec::new(),
    })
}

fn params(gen: &Generator, cfg: &CoverageConfig) -> CoverageParams {
    CoverageParams {
        generator: gen.clone(),
        config: cfg.clone(),
    }
}

fn bound_trial(
    gen: &Generator,
    theorem: Theorem,
    cfg: &CoverageConfig,
    bound_cfg: &BoundConfig,
    seed: u64,
) -> Result<Trial> {
    let sample = gen.sample(cfg.n, derive_seed(seed, 0))?;
    let lm = &sample.losses;
    let rc_opts = RcOptions::new(cfg.rc_draws, derive_seed(seed, 2)).with_exec(Exec::Sequential);
    match theorem {
        Theorem::OneRound | Theorem::Convoluted => {
            let fa = random_kfold(cfg.n, cfg.k, derive_seed(seed, 1))?;
            let rs = compute_risks(lm, &fa)?;
            let rho = compute_rho(lm, &fa, RiskReference::FullSample, None)?;
            let profile = match build_tail_profile(&rho, lm, &cfg.tail) {
                Ok(p) => p,
                Err(e) if infeasible_kind(&e) => return Ok(Trial::Infeasible),
                Err(e) => return Err(e),
            };
            if theorem == Theorem::OneRound {
                let rc = per_fold_rc(lm, &fa, rc_opts)?;
                let b = one_round_bound_iid(&rs, 0, &rc, &profile, bound_cfg);
                classify(b, |rhs| exceeds(&rs.test_err[0], rhs))
            } else {
                let rc = one_round_rc(lm, &fa, rc_opts)?;
                let dep = autocovariance_profile(&rs.t)?;
                let b = convoluted_bound_iid(&rs, &rc, &profile, &dep, bound_cfg);
                classify(b, |rhs| exceeds(&rs.avg_test, rhs))
            }
        }
        _ => {
            let bf = blocked_kfold(cfg.n, cfg.k, cfg.mu)?;
            let rs = compute_risks(lm, &bf.folds)?;
            let envelope = gen.envelope();
            if theorem == Theorem::MixingOneRound {
                let rc = BlockRc {
                    train: rademacher_complexity_with(lm, &bf.train_family0(0), rc_opts)?,
                    test: rademacher_complexity_with(lm, &bf.test_family0(0), rc_opts)?,
                };
                let b = one_round_bound_mixing(&rs, 0, &rc, &bf.layout, &cfg.mixing, envelope, cfg.varpi);
                classify(b, |rhs| exceeds(&rs.test_err[0], rhs))
            } else {
                let train_sets: Vec<_> = (0..bf.folds.k).map(|q| bf.train_family0(q)).collect();
                let test_sets: Vec<_> = (0..bf.folds.k).map(|q| bf.test_family0(q)).collect();
                let rc = BlockRc {
                    train: averaged_rc(lm, &train_sets, rc_opts)?,
                    test: averaged_rc(lm, &test_sets, rc_opts)?,
                };
                let dep = autocovariance_profile(&rs.t)?;
                let b = convoluted_bound_mixing(&rs, &rc, &dep, &bf.layout, &cfg.mixing, envelope, bound_cfg);
                classify(b, |rhs| exceeds(&rs.avg_test, rhs))
            }
        }
    }
}

/// Empirical `Pr(|mean - E| <= eps)` against the Chebyshev bound computed
/// from the generator's true autocovariances.
fn lemma1(gen: &Generator, cfg: &CoverageConfig) -> Result<CoverageReport> {
    let gammas = gen
        .true_gammas(cfg.n)
        .ok_or_else(|| Error::BadParams("lemma1 needs a generator with known autocovariances".into()))?;
    if cfg.eps_grid.is_empty() || cfg.eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::BadParams("eps grid must be non-empty and positive".into()));
    }
    let gamma0 = gammas[0];
    let v = autocovariance_time(&gammas);
    let mean = 0.0;
    let deviations: Vec<f64> = map_indexed(cfg.exec, cfg.trials, |t| {
        let path = gen.series(cfg.n, derive_seed(cfg.seed, t as u64))?;
        Ok((path.iter().sum::<f64>() / cfg.n as f64 - mean).abs())
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let grid: Vec<GridPoint> = cfg
        .eps_grid
        .iter()
        .map(|&eps| {
            let inside = deviations.iter().filter(|d| **d <= eps).count();
            let empirical = inside as f64 / cfg.trials as f64;
            let bound = chebyshev_lower_bound(gamma0, v, cfg.n, eps);
            let std_err = proportion_se(empirical, cfg.trials);
            GridPoint {
                eps,
                empirical,
                bound,
                std_err,
                pass: empirical >= bound - 2.0 * std_err,
            }
        })
        .collect();
    let violations = grid.iter().filter(|g| !g.pass).count();
    let tightest = grid
        .iter()
        .min_by(|a, b| (a.empirical - a.bound).total_cmp(&(b.empirical - b.bound)))
        .expect("non-empty grid");
    let inside = (tightest.empirical * cfg.trials as f64).round() as usize;
    let (wilson_low, wilson_high) = wilson(inside, cfg.trials, Z95);
    Ok(CoverageReport {
        theorem: Theorem::Lemma1,
        params: params(gen, cfg),
        trials: cfg.trials,
        feasible_trials: cfg.trials,
        infeasible: 0,
        violations,
        frequency: tightest.empirical,
        target: tightest.bound,
        tolerance: 2.0 * tightest.std_err,
        wilson_low,
        wilson_high,
        pass: violations == 0,
        grid,
    })
}

/// Fraction of replications where `gamma_0[T] / ||rho||_{psi_1}^2` stays
/// below `(8 + 4/(K-1)) (1 + slack)`; rho is measured against the true risk.
fn ratio_a1(gen: &Generator, cfg: &CoverageConfig) -> Result<CoverageReport> {
    let truth = gen.true_risk();
    let outcomes = map_indexed(cfg.exec, cfg.trials, |t| -> Result<Trial> {
        let seed = derive_seed(cfg.seed, t as u64);
        let sample = gen.sample(cfg.n, derive_seed(seed, 0))?;
        let fa = random_kfold(cfg.n, cfg.k, derive_seed(seed, 1))?;
        let rs = compute_risks(&sample.losses, &fa)?;
        let dep = autocovariance_profile(&rs.t)?;
        let rho = compute_rho(&sample.losses, &fa, RiskReference::Population, Some(&truth))?;
        let psi1 = estimate_orlicz_norm(&rho.rho, 1.0, cfg.tail.orlicz_tol)?;
        match lemma_a1_ratio(&dep, psi1, cfg.k, cfg.a1_slack) {
            Ok(check) => Ok(Trial::Feasible {
                violated: !check.holds,
                kappa: None,
            }),
            Err(Error::ZeroNorm) => Ok(Trial::Infeasible),
            Err(e) => Err(e),
        }
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let feasible = outcomes
        .iter()
        .filter(|o| matches!(o, Trial::Feasible { .. }))
        .count();
    let violations = outcomes
        .iter()
        .filter(|o| matches!(o, Trial::Feasible { violated: true, .. }))
        .count();
    let p = Proportion::new(violations, feasible);
    let target = 1.0 - cfg.a1_quantile;
    Ok(CoverageReport {
        theorem: Theorem::LemmaA1,
        params: params(gen, cfg),
        trials: cfg.trials,
        feasible_trials: feasible,
        infeasible: cfg.trials - feasible,
        violations,
        frequency: p.frequency,
        target,
        tolerance: 0.0,
        wilson_low: p.wilson_low,
        wilson_high: p.wilson_high,
        pass: feasible > 0 && p.frequency <= target,
        grid: Vec::new(),
    })
}

/// `|E_{S_0}[h] - E_{S~}[h]| <= (mu - 1) M beta_a` for the indicator
/// `h = 1{every family-0 block mean exceeds the marginal mean}` (M = 1).
fn block_approximation(gen: &Generator, cfg: &CoverageConfig) -> Result<CoverageReport> {
    if matches!(gen, Generator::LinearModel { .. }) {
        return Err(Error::BadParams(
            "the block check needs a sequential generator".into(),
        ));
    }
    let side = SideBlocks::new(2 * cfg.block_len * cfg.mu, cfg.mu)?;
    let centre = match gen {
        Generator::Ar1 { .. } => 0.0,
        _ => gen.true_risk()[0],
    };
    let h = |blocks: &[Vec<f64>]| {
        blocks
            .iter()
            .all(|b| b.iter().sum::<f64>() / b.len() as f64 > centre)
    };
    let pairs: Vec<(bool, bool)> = map_indexed(cfg.exec, cfg.trials, |t| {
        let seed = derive_seed(cfg.seed, t as u64);
        let path = gen.series(2 * side.a * side.mu(), derive_seed(seed, 0))?;
        let coupled = original_blocks(&path, &side)?;
        let independent = independent_blocks_redraw(gen, &side, derive_seed(seed, 1))?;
        Ok((h(&coupled), h(&independent)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let n = cfg.trials as f64;
    let hits0 = pairs.iter().filter(|p| p.0).count();
    let p0 = hits0 as f64 / n;
    let p1 = pairs.iter().filter(|p| p.1).count() as f64 / n;
    let se = (p0 * (1.0 - p0) / n + p1 * (1.0 - p1) / n).sqrt();
    let bound = (cfg.mu as f64 - 1.0) * mixing_beta(&cfg.mixing, cfg.block_len)?;
    let gap = (p0 - p1).abs();
    let (wilson_low, wilson_high) = wilson(hits0, cfg.trials, Z95);
    Ok(CoverageReport {
        theorem: Theorem::Yu,
        params: params(gen, cfg),
        trials: cfg.trials,
        feasible_trials: cfg.trials,
        infeasible: 0,
        violations: usize::from(gap > bound + 3.0 * se),
        frequency: gap,
        target: bound,
        tolerance: 3.0 * se,
        wilson_low,
        wilson_high,
        pass: gap <= bound + 3.0 * se,
        grid: Vec::new(),
    })
}
