//! Upper bounds on cross-validated test error.
//!
//! Four bound families share one result type:
//!
//! | mode                | holds for                     | penalty                        | confidence          |
//! |---------------------|-------------------------------|--------------------------------|---------------------|
//! | `IidOneRound`       | one round's test error        | `2 RC_{n/K} + varsigma`        | `1 - varpi`         |
//! | `IidConvoluted`     | test error averaged over K    | `2 RC(n, K) + varsigma`        | `(1 - kappa)^+`     |
//! | `MixingOneRound`    | one round, beta-mixing data   | `2 RC_blocks + M sqrt(..)`     | `1 - varpi`         |
//! | `MixingConvoluted`  | K-average, beta-mixing data   | `2 RC_blocks + M sqrt(..)`     | `(1 - kappa)^+`     |
//!
//! Right-hand sides are per hypothesis: the training error depends on the
//! hypothesis, every other term is shared. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::complexity::RademacherEstimate;
use crate::dependence::{mixing_beta, DependenceProfile, MixingModel};
use crate::error::{Error, Result};
use crate::folds::BlockLayout;
use crate::risk::RiskSummary;
use crate::tails::{TailClass, TailProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    IidOneRound,
    IidConvoluted,
    MixingOneRound,
    MixingConvoluted,
}

impl BoundMode {
    pub fn is_convoluted(self) -> bool {
        matches!(self, BoundMode::IidConvoluted | BoundMode::MixingConvoluted)
    }

    pub fn is_mixing(self) -> bool {
        matches!(self, BoundMode::MixingOneRound | BoundMode::MixingConvoluted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Failure mass in (0, 1].
    pub varpi: f64,
    /// Minimum acceptable `(1 - kappa)^+` for a convoluted bound.
    pub confidence_floor: f64,
    /// Absolute constant of the subexponential concentration inequality.
    pub c: f64,
    pub mode: BoundMode,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            varpi: 0.1,
            confidence_floor: 0.0,
            c: 1.0,
            mode: BoundMode::IidConvoluted,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        check_varpi(self.varpi)?;
        if !(0.0..1.0).contains(&self.confidence_floor) {
            return Err(Error::Domain(format!(
                "confidence floor must lie in [0, 1), got {}",
                self.confidence_floor
            )));
        }
        check_c(self.c)
    }
}

fn check_varpi(varpi: f64) -> Result<()> {
    if !(varpi > 0.0 && varpi <= 1.0) {
        return Err(Error::Domain(format!(
            "failure mass varpi must lie in (0, 1], got {varpi}"
        )));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("constant c must be positive, got {c}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Bounded,
    Subgaussian,
    /// `varpi < 2 exp(-2c)`
    SubexponentialSmall,
    /// `varpi >= 2 exp(-2c)`
    SubexponentialLarge,
    Mixing,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Bounded => "bounded",
            Branch::Subgaussian => "subgaussian",
            Branch::SubexponentialSmall => "subexponential_small",
            Branch::SubexponentialLarge => "subexponential_large",
            Branch::Mixing => "mixing",
        }
    }
}

/// Which block family attained the larger complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSide {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub mode: BoundMode,
    pub branch: Branch,
    /// Confidence penalty (the `M sqrt(..)` term in mixing modes).
    pub varsigma: f64,
    /// The complexity term, already doubled.
    pub rc_term: f64,
    /// Per-hypothesis right-hand side; `None` when infeasible.
    pub rhs: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub confidence: f64,
    pub feasible: bool,
    pub varpi_prime: Option<f64>,
    pub rc_side: Option<BlockSide>,
    pub reason: Option<String>,
}

impl BoundResult {
    /// Smallest right-hand side and its hypothesis (lowest index on ties).
    pub fn argmin(&self) -> Option<(usize, f64)> {
        let rhs = self.rhs.as_ref()?;
        let mut best = (0, rhs[0]);
        for (j, &v) in rhs.iter().enumerate().skip(1) {
            if v < best.1 {
                best = (j, v);
            }
        }
        Some(best)
    }
}

/// The Theorem-1 style confidence penalty and the branch that produced it.
///
/// Branch priority: bounded, then subgaussian, then subexponential; the
/// subexponential sub-branch is chosen by comparing `varpi` with
/// `2 exp(-2c)`. Fold size is the conservative `floor(n/K)`.
pub fn varsigma_iid(profile: &TailProfile, n: usize, k: usize, varpi: f64, c: f64) -> Result<(f64, Branch)> {
    check_varpi(varpi)?;
    check_c(c)?;
    if k < 2 || k > n {
        return Err(Error::BadK { k, n });
    }
    let fold = (n / k) as f64;
    let root = ((1.0 / varpi).ln() / fold).sqrt();
    Ok(match profile.tail_class {
        TailClass::Bounded => {
            let m = profile.envelope.ok_or(Error::UnboundedClass)?;
            (2.0 * m * root, Branch::Bounded)
        }
        TailClass::Subgaussian => (2.0 * profile.xi * profile.sigma_tilde * root, Branch::Subgaussian),
        TailClass::Subexponential => {
            let psi1 = profile.psi1.ok_or(Error::NoBranch)?;
            let log_root = (2.0 / varpi).ln() / c;
            if varpi < 2.0 * (-2.0 * c).exp() {
                (psi1 * log_root, Branch::SubexponentialSmall)
            } else {
                (psi1 * (2.0 * log_root).sqrt(), Branch::SubexponentialLarge)
            }
        }
    })
}

fn check_round(rs: &RiskSummary, q: usize) -> Result<()> {
    if q >= rs.k {
        return Err(Error::BadParams(format!(
            "round {q} out of range for K = {}",
            rs.k
        )));
    }
    Ok(())
}

/// `test_err[q][j] <= train_err[q][j] + 2 RC_{n/K} + varsigma` w.p. `1 - varpi`.
pub fn one_round_bound_iid(
    rs: &RiskSummary,
    q: usize,
    rc_fold: &RademacherEstimate,
    profile: &TailProfile,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    check_round(rs, q)?;
    let (varsigma, branch) = varsigma_iid(profile, rs.n, rs.k, cfg.varpi, cfg.c)?;
    let rc_term = 2.0 * rc_fold.value;
    Ok(BoundResult {
        mode: BoundMode::IidOneRound,
        branch,
        varsigma,
        rc_term,
        rhs: Some(rs.train_err[q].iter().map(|t| t + rc_term + varsigma).collect()),
        kappa: None,
        confidence: 1.0 - cfg.varpi,
        feasible: true,
        varpi_prime: None,
        rc_side: None,
        reason: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaCase {
    Psi2,
    /// `varpi >= 2 exp(-2c)`
    Psi1Large,
    Psi1Small,
}

/// Failure mass of the K-round average bound.
pub fn kappa_convoluted(
    profile: &TailProfile,
    dep: &DependenceProfile,
    k: usize,
    varpi: f64,
    c: f64,
) -> Result<(f64, KappaCase)> {
    check_varpi(varpi)?;
    check_c(c)?;
    if k < 2 {
        return Err(Error::BadK { k, n: k });
    }
    let inflation = 1.0 + 2.0 * dep.v;
    let k = k as f64;
    Ok(match profile.tail_class {
        TailClass::Bounded | TailClass::Subgaussian => {
            if varpi == 1.0 {
                return Err(Error::UndefinedAtVarpiOne);
            }
            let xi2 = profile.xi * profile.xi;
            (inflation / (2.0 * xi2 * k * (1.0 / varpi).ln()), KappaCase::Psi2)
        }
        TailClass::Subexponential => {
            let log_root = (2.0 / varpi).ln() / c;
            if varpi >= 2.0 * (-2.0 * c).exp() {
                (6.0 * inflation / (k * log_root), KappaCase::Psi1Large)
            } else {
                (12.0 * inflation / (k * log_root * log_root), KappaCase::Psi1Small)
            }
        }
    })
}

fn confidence_of(kappa: f64) -> f64 {
    (1.0 - kappa).max(0.0)
}

/// `avg_test[j] <= avg_train[j] + 2 RC(n, K) + varsigma` w.p. `(1 - kappa)^+`.
pub fn convoluted_bound_iid(
    rs: &RiskSummary,
    rc_one_round: &RademacherEstimate,
    profile: &TailProfile,
    dep: &DependenceProfile,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    let (varsigma, branch) = varsigma_iid(profile, rs.n, rs.k, cfg.varpi, cfg.c)?;
    let (kappa, _) = kappa_convoluted(profile, dep, rs.k, cfg.varpi, cfg.c)?;
    let rc_term = 2.0 * rc_one_round.value;
    let confidence = confidence_of(kappa);
    let reason = if kappa >= 1.0 {
        Some(format!("kappa = {kappa} >= 1"))
    } else if confidence < cfg.confidence_floor {
        Some(format!(
            "confidence {confidence} below floor {}",
            cfg.confidence_floor
        ))
    } else {
        None
    };
    let feasible = reason.is_none();
    Ok(BoundResult {
        mode: BoundMode::IidConvoluted,
        branch,
        varsigma,
        rc_term,
        rhs: feasible.then(|| rs.avg_train.iter().map(|t| t + rc_term + varsigma).collect()),
        kappa: Some(kappa),
        confidence,
        feasible,
        varpi_prime: None,
        rc_side: None,
        reason,
    })
}

/// `(mu - 1)(beta_{a_t} + beta_{a_s})`.
pub fn mixing_correction(model: &MixingModel, layout: &BlockLayout) -> Result<f64> {
    let beta = mixing_beta(model, layout.a_t())? + mixing_beta(model, layout.a_s())?;
    Ok((layout.mu as f64 - 1.0) * beta)
}

/// `varpi - (mu - 1)(beta_{a_t} + beta_{a_s})`; may be non-positive.
pub fn varpi_prime(varpi: f64, model: &MixingModel, layout: &BlockLayout) -> Result<f64> {
    check_varpi(varpi)?;
    Ok(varpi - mixing_correction(model, layout)?)
}

/// `M sqrt(log(4/varpi') / (2 mu))`.
pub fn mixing_penalty(m: f64, varpi_prime: f64, mu: usize) -> f64 {
    m * ((4.0 / varpi_prime).ln() / (2.0 * mu as f64)).sqrt()
}

/// Complexities over the family-0 blocks of the training and test sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRc {
    pub train: RademacherEstimate,
    pub test: RademacherEstimate,
}

impl BlockRc {
    /// The larger of the two sides; ties go to the test side.
    pub fn dominant(&self) -> (f64, BlockSide) {
        if self.train.value > self.test.value {
            (self.train.value, BlockSide::Train)
        } else {
            (self.test.value, BlockSide::Test)
        }
    }
}

fn mixing_inputs(
    envelope: Option<f64>,
    varpi: f64,
    model: &MixingModel,
    layout: &BlockLayout,
) -> Result<(f64, f64)> {
    let m = envelope.ok_or(Error::UnboundedClass)?;
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::UnboundedClass);
    }
    let correction = mixing_correction(model, layout)?;
    check_varpi(varpi)?;
    let vp = varpi - correction;
    if correction >= 1.0 || vp <= 0.0 {
        return Err(Error::InfeasibleMixing { varpi_prime: vp });
    }
    Ok((m, vp))
}

/// One-round bound for beta-mixing data on round `q` of a blocked split.
pub fn one_round_bound_mixing(
    rs: &RiskSummary,
    q: usize,
    rc_blocks: &BlockRc,
    layout: &BlockLayout,
    mixing: &MixingModel,
    envelope: Option<f64>,
    varpi: f64,
) -> Result<BoundResult> {
    check_round(rs, q)?;
    let (m, vp) = mixing_inputs(envelope, varpi, mixing, layout)?;
    let penalty = mixing_penalty(m, vp, layout.mu);
    let (rc, side) = rc_blocks.dominant();
    let rc_term = 2.0 * rc;
    Ok(BoundResult {
        mode: BoundMode::MixingOneRound,
        branch: Branch::Mixing,
        varsigma: penalty,
        rc_term,
        rhs: Some(rs.train_err[q].iter().map(|t| t + penalty + rc_term).collect()),
        kappa: None,
        confidence: 1.0 - varpi,
        feasible: true,
        varpi_prime: Some(vp),
        rc_side: Some(side),
        reason: None,
    })
}

/// Failure mass of the K-average bound on blocked data.
pub fn mixing_kappa(v: f64, k: usize, mu: usize, varpi_prime: f64) -> f64 {
    2.0 * (1.0 + 2.0 * v) / ((4.0 / varpi_prime).ln() * k as f64 / mu as f64)
}

/// Largest `varpi'` for which the mixing kappa stays at or below one.
pub fn mixing_window_upper(v: f64, k: usize, mu: usize) -> f64 {
    4.0 * (-2.0 * (1.0 + 2.0 * v) / (k as f64 / mu as f64)).exp()
}

/// K-average bound for beta-mixing data.
pub fn convoluted_bound_mixing(
    rs: &RiskSummary,
    rc_blocks: &BlockRc,
    dep: &DependenceProfile,
    layout: &BlockLayout,
    mixing: &MixingModel,
    envelope: Option<f64>,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    let (m, vp) = mixing_inputs(envelope, cfg.varpi, mixing, layout)?;
    let upper = mixing_window_upper(dep.v, rs.k, layout.mu);
    if vp > upper * (1.0 + 1e-12) {
        return Err(Error::InfeasibleWindow {
            varpi_prime: vp,
            upper,
        });
    }
    let kappa = mixing_kappa(dep.v, rs.k, layout.mu, vp);
    let confidence = confidence_of(kappa);
    let penalty = mixing_penalty(m, vp, layout.mu);
    let (rc, side) = rc_blocks.dominant();
    let rc_term = 2.0 * rc;
    let reason = (confidence < cfg.confidence_floor || kappa >= 1.0)
        .then(|| format!("confidence {confidence} below floor {}", cfg.confidence_floor));
    let feasible = reason.is_none();
    Ok(BoundResult {
        mode: BoundMode::MixingConvoluted,
        branch: Branch::Mixing,
        varsigma: penalty,
        rc_term,
        rhs: feasible.then(|| rs.avg_train.iter().map(|t| t + rc_term + penalty).collect()),
        kappa: Some(kappa),
        confidence,
        feasible,
        varpi_prime: Some(vp),
        rc_side: Some(side),
        reason,
    })
}

pub const DEFAULT_A1_SLACK: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaA1Check {
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares `gamma_0[T] / ||rho||_{psi_1}^2` with `8 + 4/(K - 1)`,
/// allowing `slack` relative excess for estimation noise.
pub fn lemma_a1_ratio(dep: &DependenceProfile, psi1_rho: f64, k: usize, slack: f64) -> Result<LemmaA1Check> {
    if k < 2 {
        return Err(Error::BadK { k, n: k });
    }
    if !(psi1_rho > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let ratio = dep.gamma0 / (psi1_rho * psi1_rho);
    let bound = 8.0 + 4.0 / (k as f64 - 1.0);
    Ok(LemmaA1Check {
        ratio,
        bound,
        holds: ratio <= bound * (1.0 + slack),
    })
}
