use std::path::{Path, PathBuf};

use kfold_stability::bounds::{BoundConfig, BoundMode};
use kfold_stability::selection::SelectConfig;
use kfold_stability::tails::{TailConfig, DEFAULT_ORLICZ_TOL};
use kfold_stability::{Exec, LossKind, LossSpec, MixingModel, ModelClass, Ordering};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const OUT_ENV: &str = "KFOLD_STABILITY_OUT";

/// The hypothesis list: either explicit vectors or a cartesian grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Declared bound on every loss value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<ModelClass> {
        let class = match (&self.grid, &self.vectors) {
            (Some(axes), None) => {
                let c = ModelClass::grid(axes)?;
                match &self.labels {
                    Some(labels) => ModelClass::new(
                        (0..c.len()).map(|j| c.hypothesis(j).to_vec()).collect(),
                        Some(labels.clone()),
                    )?,
                    None => c,
                }
            }
            (None, Some(vectors)) => ModelClass::new(vectors.clone(), self.labels.clone())?,
            _ => {
                return Err(CliError::Config(
                    "[model] needs exactly one of `grid` or `vectors`".into(),
                ))
            }
        };
        match self.envelope {
            Some(m) => Ok(class.with_envelope(m)?),
            None => Ok(class),
        }
    }
}

fn default_varpi() -> f64 {
    0.1
}
fn default_one() -> f64 {
    1.0
}
fn default_nu() -> f64 {
    2.0
}
fn default_mode() -> BoundMode {
    BoundMode::IidConvoluted
}
fn default_draws() -> usize {
    kfold_stability::complexity::DEFAULT_DRAWS
}
fn default_mu() -> usize {
    2
}
fn default_mixing() -> MixingModel {
    MixingModel::Independent
}
fn default_ordering() -> Ordering {
    Ordering::Exchangeable
}

/// One experiment: a dataset, a loss, a hypothesis list and bound settings.
///
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    #[serde(default = "default_ordering")]
    pub ordering: Ordering,
    pub loss: LossSpec,
    pub model: ModelSpec,
    #[serde(default = "default_mode")]
    pub mode: BoundMode,
    #[serde(default = "default_varpi")]
    pub varpi: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_one")]
    pub xi: f64,
    #[serde(default = "default_one")]
    pub c: f64,
    #[serde(default)]
    pub confidence_floor: f64,
    /// Inclusive `[K_min, K_max]`; absent means the default grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<[usize; 2]>,
    #[serde(default = "default_mu")]
    pub mu: usize,
    #[serde(default = "default_mixing")]
    pub mixing: MixingModel,
    #[serde(default = "default_draws")]
    pub rc_draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset_path: Option<PathBuf>,
    pub mode: Option<BoundMode>,
    pub varpi: Option<f64>,
    pub xi: Option<f64>,
    pub c: Option<f64>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub mu: Option<usize>,
    pub rc_draws: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.apply(overrides);
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.dataset_path.is_relative() && overrides.dataset_path.is_none() {
            cfg.dataset_path = base.join(&cfg.dataset_path);
        }
        if let Some(out) = &cfg.output_dir {
            if out.is_relative() && overrides.output_dir.is_none() {
                cfg.output_dir = Some(base.join(out));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.dataset_path {
            self.dataset_path = p.clone();
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field {
                    self.$field = v;
                }
            )*};
        }
        set!(varpi, xi, c, mu, rc_draws, seed);
        if o.k_min.is_some() || o.k_max.is_some() {
            let [lo, hi] = self.k_range.unwrap_or([2, usize::MAX]);
            self.k_range = Some([o.k_min.unwrap_or(lo), o.k_max.unwrap_or(hi)]);
        }
        if let Some(p) = &o.output_dir {
            self.output_dir = Some(p.clone());
        }
    }

    /// Domain checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if !self.dataset_path.exists() {
            return Err(CliError::Config(format!(
                "dataset_path {} does not exist",
                self.dataset_path.display()
            )));
        }
        self.bound_config().validate()?;
        self.loss.validate()?;
        self.mixing.validate()?;
        if !(1.0..=2.0).contains(&self.nu) {
            return Err(CliError::Config(format!(
                "nu must lie in [1, 2], got {}",
                self.nu
            )));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(CliError::Config(format!("xi must be positive, got {}", self.xi)));
        }
        if self.rc_draws == 0 {
            return Err(CliError::Config("rc_draws must be at least 1".into()));
        }
        if let Some([lo, hi]) = self.k_range {
            if lo < 2 || lo > hi {
                return Err(CliError::Config(format!(
                    "k_range [{lo}, {hi}] needs 2 <= K_min <= K_max"
                )));
            }
        }
        if self.mode.is_mixing() && self.mu < 2 {
            return Err(CliError::Config(format!("mu must exceed 1, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn bound_config(&self) -> BoundConfig {
        BoundConfig {
            varpi: self.varpi,
            confidence_floor: self.confidence_floor,
            c: self.c,
            mode: self.mode,
        }
    }

    pub fn tail_config(&self) -> TailConfig {
        TailConfig {
            nu: self.nu,
            xi: self.xi,
            orlicz_tol: DEFAULT_ORLICZ_TOL,
            orlicz_u_cap: f64::INFINITY,
            assume: None,
        }
    }

    /// K grid clipped to `[2, n]`.
    pub fn k_values(&self, n: usize) -> Vec<usize> {
        match self.k_range {
            Some([lo, hi]) => (lo..=hi.min(n)).collect(),
            None => kfold_stability::selection::default_k_grid(n),
        }
    }

    pub fn select_config(&self, n: usize) -> SelectConfig {
        SelectConfig {
            bound: self.bound_config(),
            tail: self.tail_config(),
            k_values: self.k_values(n),
            rc_draws: self.rc_draws,
            seed: self.seed,
            mu: self.mu,
            mixing: self.mixing.clone(),
            exec: Exec::default(),
        }
    }

    /// Flag, then config, then the environment, then the working directory.
    pub fn resolve_output_dir(&self) -> PathBuf {
        resolve_output_dir(self.output_dir.as_deref())
    }
}

pub fn resolve_output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Minimal example used in docs and tests.
pub fn example() -> RunConfig {
    RunConfig {
        dataset_path: PathBuf::from("toy.csv"),
        ordering: Ordering::Exchangeable,
        loss: LossSpec::new(LossKind::Squared),
        model: ModelSpec {
            grid: Some(vec![vec![0.4, 0.8, 1.2], vec![-1.0, -0.5, 0.0]]),
            vectors: None,
            labels: None,
            envelope: None,
        },
        mode: BoundMode::IidConvoluted,
        varpi: 0.1,
        nu: 2.0,
        xi: 1.0,
        c: 1.0,
        confidence_floor: 0.0,
        k_range: Some([2, 10]),
        mu: 2,
        mixing: MixingModel::Independent,
        rc_draws: 512,
        seed: 7,
        output_dir: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_round_trips() {
        let cfg = example();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_toml_str(
            r#"
            dataset_path = "d.csv"
            [loss]
            kind = "absolute"
            [model]
            vectors = [[1.0], [2.0]]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.varpi, 0.1);
        assert_eq!(cfg.mode, BoundMode::IidConvoluted);
        assert_eq!(cfg.rc_draws, 1024);
        assert_eq!(cfg.k_range, None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::from_toml_str("dataset_path = \"d.csv\"\nvarpi = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn flags_win() {
        let mut cfg = example();
        cfg.apply(&Overrides {
            varpi: Some(0.05),
            k_max: Some(4),
            seed: Some(1),
            ..Overrides::default()
        });
        assert_eq!((cfg.varpi, cfg.k_range, cfg.seed), (0.05, Some([2, 4]), 1));
    }

    #[test]
    fn model_spec_needs_one_source() {
        let spec = ModelSpec {
            grid: None,
            vectors: None,
            labels: None,
            envelope: None,
        };
        assert!(spec.build().is_err());
        let grid = example().model.build().unwrap();
        assert_eq!(grid.len(), 9);
    }
}
