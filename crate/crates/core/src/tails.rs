//! Orlicz norms, variance proxies and the tail class that picks the
//! confidence-penalty branch.

use serde::{Deserialize, Serialize};

use crate::data::LossMatrix;
use crate::error::{Error, Result};
use crate::risk::RhoSample;

pub const DEFAULT_ORLICZ_TOL: f64 = 1e-6;

/// Sample-mean Orlicz-psi_nu norm: the smallest `u` with
/// `mean(exp(|z|^nu / u^nu)) <= 2`, located by bisection to `tol * max|z|`.
pub fn estimate_orlicz_norm(samples: &[f64], nu: f64, tol: f64) -> Result<f64> {
    estimate_orlicz_norm_capped(samples, nu, tol, f64::INFINITY)
}

pub fn estimate_orlicz_norm_capped(samples: &[f64], nu: f64, tol: f64, cap: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    if !(1.0..=2.0).contains(&nu) {
        return Err(Error::BadParams(format!("nu must lie in [1, 2], got {nu}")));
    }
    if !(tol > 0.0) {
        return Err(Error::BadParams(format!("tolerance must be positive, got {tol}")));
    }
    if samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::BadParams("samples must be finite".into()));
    }
    let scale = samples.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    // Normalise so that max |z| = 1; the norm is homogeneous of degree one.
    let powered: Vec<f64> = samples.iter().map(|z| (z.abs() / scale).powf(nu)).collect();
    let excess = |u: f64| log_mean_exp(&powered, u.powf(-nu)) - std::f64::consts::LN_2;

    // At u = ln(2)^(-1/nu) every term is at most 2.
    let mut hi = std::f64::consts::LN_2.powf(-1.0 / nu);
    let mut lo = hi / 2.0;
    while excess(lo) <= 0.0 {
        hi = lo;
        lo /= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if excess(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let norm = hi * scale;
    if norm > cap {
        return Err(Error::NoFiniteNorm { nu, cap });
    }
    Ok(norm)
}

/// `ln(mean(exp(c * x_i)))`, stable for large `c`.
fn log_mean_exp(x: &[f64], c: f64) -> f64 {
    let top = x.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(c * v));
    let s: f64 = x.iter().map(|&v| (c * v - top).exp()).sum();
    top + (s / x.len() as f64).ln()
}

/// Sample mean of `exp(|z|^nu / u^nu)`.
pub fn orlicz_moment(samples: &[f64], nu: f64, u: f64) -> f64 {
    samples
        .iter()
        .map(|z| (z.abs().powf(nu) / u.powf(nu)).exp())
        .sum::<f64>()
        / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    Bounded,
    Subgaussian,
    Subexponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub nu: f64,
    /// Ratio of the variance proxy to the variance of rho.
    pub xi: f64,
    pub orlicz_tol: f64,
    /// Norm estimates above this count as infinite.
    pub orlicz_u_cap: f64,
    /// Overrides data-driven classification when the tail is known a priori.
    pub assume: Option<TailClass>,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            nu: 2.0,
            xi: 1.0,
            orlicz_tol: DEFAULT_ORLICZ_TOL,
            orlicz_u_cap: f64::INFINITY,
            assume: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub nu: f64,
    /// Estimated norm of rho at `nu`.
    pub psi_norm: f64,
    pub psi2: Option<f64>,
    pub psi1: Option<f64>,
    /// Square root of the largest per-hypothesis loss variance.
    pub sigma_tilde: f64,
    pub xi: f64,
    pub envelope: Option<f64>,
    pub envelope_certified: bool,
    pub tail_class: TailClass,
}

pub fn build_tail_profile(rho: &RhoSample, lm: &LossMatrix, cfg: &TailConfig) -> Result<TailProfile> {
    if rho.rho.len() < 2 {
        return Err(Error::BadParams("need rho from at least two folds".into()));
    }
    if !(cfg.xi > 0.0) {
        return Err(Error::BadParams(format!("xi must be positive, got {}", cfg.xi)));
    }
    let norm = |nu| estimate_orlicz_norm_capped(&rho.rho, nu, cfg.orlicz_tol, cfg.orlicz_u_cap);
    let psi2 = norm(2.0).ok();
    let psi1 = norm(1.0).ok();
    let envelope = lm.envelope();
    let certified = envelope.is_some_and(|e| e.certified());

    let tail_class = match cfg.assume {
        Some(TailClass::Bounded) if envelope.is_none() => return Err(Error::UnboundedClass),
        Some(c) => c,
        None if certified => TailClass::Bounded,
        None if psi2.is_some() => TailClass::Subgaussian,
        None if psi1.is_some() => TailClass::Subexponential,
        None => {
            return Err(Error::NoFiniteNorm {
                nu: 1.0,
                cap: cfg.orlicz_u_cap,
            })
        }
    };
    let psi_norm = match tail_class {
        TailClass::Subexponential => psi1.ok_or(Error::NoBranch)?,
        _ => norm(cfg.nu).unwrap_or(f64::INFINITY),
    };
    Ok(TailProfile {
        nu: cfg.nu,
        psi_norm,
        psi2,
        psi1,
        sigma_tilde: max_column_variance(lm).sqrt(),
        xi: cfg.xi,
        envelope: envelope.map(|e| e.value),
        envelope_certified: certified,
        tail_class,
    })
}

/// Largest mean-square deviation of a loss column about its mean.
fn max_column_variance(lm: &LossMatrix) -> f64 {
    let means = lm.column_means();
    let mut acc = vec![0.0; lm.m()];
    for i in 0..lm.n() {
        for ((a, v), mu) in acc.iter_mut().zip(lm.row(i)).zip(&means) {
            *a += (v - mu).powi(2);
        }
    }
    acc.iter().fold(0.0f64, |a, s| a.max(s / lm.n() as f64))
}
