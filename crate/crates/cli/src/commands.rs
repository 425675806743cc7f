use std::path::{Path, PathBuf};

use kfold_stability::bounds::BoundMode;
use kfold_stability::complexity::{one_round_rc, rademacher_complexity_with, RcMethod, RcOptions};
use kfold_stability::folds::{blocked_kfold, random_kfold, FoldAssignment, Scheme};
use kfold_stability::selection::{fold_assignment_for, scan_curve, summarize_curve};
use kfold_stability::verify::{coverage_trial, CoverageConfig, CoverageReport, Generator, Theorem};
use kfold_stability::{build_loss_matrix, compute_risks, LossMatrix, MixingModel, RademacherEstimate};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io;

pub const CURVE_FILE: &str = "bound_curve.csv";
pub const RISKS_FILE: &str = "risks.csv";
pub const SELECTION_FILE: &str = "selection.json";

/// Contents of `selection.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub k_star: usize,
    /// Label of the selected hypothesis.
    pub b_star: String,
    pub b_star_index: usize,
    pub rhs_star: f64,
    pub confidence: f64,
    pub mode: BoundMode,
    pub varpi: f64,
    pub seed: u64,
}

pub fn load_losses(cfg: &RunConfig) -> Result<LossMatrix> {
    let data = io::read_dataset(&cfg.dataset_path, cfg.ordering)?;
    let model = cfg.model.build()?;
    Ok(build_loss_matrix(&data, &cfg.loss, &model)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Scans the K grid and writes `bound_curve.csv` and `selection.json`;
/// with `risks` also the per-round table at K*. The curve is written even
/// when no K is feasible.
pub fn run_select(cfg: &RunConfig, out: &Path, risks: bool) -> Result<SelectionFile> {
    let lm = load_losses(cfg)?;
    let sel_cfg = cfg.select_config(lm.n());
    let curve = scan_curve(&lm, &sel_cfg)?;
    ensure_dir(out)?;
    io::write_curve(&out.join(CURVE_FILE), &curve, lm.labels(), cfg.seed)?;
    let result = summarize_curve(&lm, curve, cfg.seed)?;
    if risks {
        let fa = fold_assignment_for(lm.n(), result.k_star, &sel_cfg)?;
        let rs = compute_risks(&lm, &fa)?;
        io::write_risks(&out.join(RISKS_FILE), &rs, lm.labels(), cfg.seed)?;
    }
    let file = SelectionFile {
        k_star: result.k_star,
        b_star: result.b_star_label,
        b_star_index: result.b_star,
        rhs_star: result.rhs_star,
        confidence: result.confidence,
        mode: cfg.mode,
        varpi: cfg.varpi,
        seed: cfg.seed,
    };
    io::write_json(&out.join(SELECTION_FILE), &file)?;
    Ok(file)
}

/// Parameters of a `verify` run before theorem defaults are applied.
#[derive(Debug, Clone, Default)]
pub struct VerifyRequest {
    pub theorem: String,
    pub trials: usize,
    pub seed: u64,
    pub generator: Option<PathBuf>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub mu: Option<usize>,
    pub block_len: Option<usize>,
    pub varpi: Option<f64>,
    pub c: Option<f64>,
    pub rc_draws: Option<usize>,
    pub mixing: Option<MixingModel>,
}

/// Generator and configuration a theorem runs with when nothing is given.
pub fn verify_defaults(theorem: Theorem) -> (Generator, CoverageConfig) {
    let base = CoverageConfig::default();
    let ar1 = Generator::ar1(0.6, 1.0);
    let ar1_mixing = MixingModel::Exponential { beta0: 1.0, r: 0.6 };
    match theorem {
        Theorem::OneRound => (Generator::BoundedUniform { m: 1.0, classes: 8 }, base),
        Theorem::Convoluted => (
            Generator::GaussianLoss {
                mean: 2.0,
                sd: 0.5,
                classes: 8,
            },
            base,
        ),
        Theorem::MixingOneRound => (
            ar1,
            CoverageConfig {
                n: 240,
                k: 2,
                mu: 3,
                varpi: 0.5,
                mixing: ar1_mixing,
                ..base
            },
        ),
        Theorem::MixingConvoluted => (
            ar1,
            CoverageConfig {
                n: 240,
                k: 20,
                mu: 2,
                varpi: 0.5,
                mixing: ar1_mixing,
                ..base
            },
        ),
        Theorem::Lemma1 => (ar1, base),
        Theorem::Yu => (
            ar1,
            CoverageConfig {
                mu: 3,
                mixing: ar1_mixing,
                ..base
            },
        ),
        Theorem::LemmaA1 => (
            Generator::ExponentialLoss {
                rate: 1.0,
                classes: 4,
            },
            CoverageConfig { k: 10, ..base },
        ),
    }
}

/// Reads a generator description from JSON, or TOML when the extension says so.
pub fn read_generator(path: &Path) -> Result<Generator> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let gen = if is_toml {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    Ok(gen)
}

pub fn run_verify(req: &VerifyRequest, out: &Path) -> Result<(CoverageReport, PathBuf)> {
    let theorem: Theorem = req.theorem.parse()?;
    let (default_gen, mut cfg) = verify_defaults(theorem);
    let gen = match &req.generator {
        Some(p) => read_generator(p)?,
        None => default_gen,
    };
    cfg.trials = req.trials;
    cfg.seed = req.seed;
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = req.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(n, k, mu, block_len, varpi, c, rc_draws, mixing);
    let report = coverage_trial(&gen, theorem, &cfg)?;
    ensure_dir(out)?;
    let path = out.join(format!("verify_{}.json", theorem.tag()));
    io::write_json(&path, &report)?;
    Ok((report, path))
}

pub fn run_split(n: usize, k: usize, scheme: Scheme, mu: usize, seed: u64) -> Result<FoldAssignment> {
    Ok(match scheme {
        Scheme::Random => random_kfold(n, k, seed)?,
        Scheme::Blocked => blocked_kfold(n, k, mu)?.folds,
    })
}

/// Output of the `rc` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcReport {
    /// Fold count of the split, absent for the full sample.
    pub k: Option<usize>,
    pub hypotheses: usize,
    #[serde(flatten)]
    pub estimate: RademacherEstimate,
    pub seed: u64,
}

/// RC of the loss class on the whole sample, or the one-round complexity of
/// the first round of a K-fold split.
pub fn run_rc(cfg: &RunConfig, k: Option<usize>, method: RcMethod) -> Result<RcReport> {
    let lm = load_losses(cfg)?;
    let opts = RcOptions::new(cfg.rc_draws, cfg.seed).with_method(method);
    let estimate = match k {
        None => {
            let all: Vec<usize> = (0..lm.n()).collect();
            rademacher_complexity_with(&lm, &all, opts)?
        }
        Some(k) => {
            let sel = cfg.select_config(lm.n());
            let fa = fold_assignment_for(lm.n(), k, &sel)?;
            one_round_rc(&lm, &fa, opts)?
        }
    };
    Ok(RcReport {
        k,
        hypotheses: lm.m(),
        estimate,
        seed: cfg.seed,
    })
}
