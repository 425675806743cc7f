//! Empirical Rademacher complexity of the loss class.
//!
//! For an index set of size `l` the quantity is
//! `E_sigma max_j |(2/l) sum_i sigma_i Q(b_j, z_i)|`, computed exactly by
//! enumerating all `2^l` sign patterns when `2^l * |class| <= 2^20`, and by
//! Monte Carlo over independently seeded sign vectors otherwise.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::LossMatrix;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed, rng, Exec};
use crate::folds::FoldAssignment;

/// Work limit `2^l * |class|` for exhaustive enumeration.
pub const EXACT_LIMIT: u64 = 1 << 20;
pub const DEFAULT_DRAWS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub value: f64,
    /// Sign vectors averaged over (`2^l` when exact).
    pub draws: usize,
    pub std_err: f64,
    pub l: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcMethod {
    /// Exhaustive when within [`EXACT_LIMIT`], Monte Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcOptions {
    pub draws: usize,
    pub seed: u64,
    pub method: RcMethod,
    pub exec: Exec,
}

impl RcOptions {
    pub fn new(draws: usize, seed: u64) -> Self {
        Self {
            draws,
            seed,
            method: RcMethod::Auto,
            exec: Exec::default(),
        }
    }

    pub fn with_method(mut self, method: RcMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn reseed(self, stream: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, stream),
            ..self
        }
    }
}

pub fn enumerable(l: usize, m: usize) -> bool {
    l < 64 && (1u64 << l).saturating_mul(m as u64) <= EXACT_LIMIT
}

pub fn rademacher_complexity(
    lm: &LossMatrix,
    indices: &[usize],
    draws: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    rademacher_complexity_with(lm, indices, RcOptions::new(draws, seed))
}

pub fn rademacher_complexity_with(
    lm: &LossMatrix,
    indices: &[usize],
    opts: RcOptions,
) -> Result<RademacherEstimate> {
    lm.validate_indices(indices)?;
    let can_enumerate = enumerable(indices.len(), lm.m());
    match opts.method {
        RcMethod::Auto if can_enumerate => Ok(exhaustive(lm, indices)),
        RcMethod::Exhaustive if can_enumerate => Ok(exhaustive(lm, indices)),
        RcMethod::Exhaustive => Err(Error::BadParams(format!(
            "2^{} x {} sign patterns exceed the enumeration limit",
            indices.len(),
            lm.m()
        ))),
        RcMethod::Auto | RcMethod::MonteCarlo => {
            if opts.draws == 0 {
                return Err(Error::BadParams("draws must be at least 1".into()));
            }
            Ok(monte_carlo(lm, indices, opts))
        }
    }
}

/// Gray-code walk over all sign patterns, updating one coordinate per step.
fn exhaustive(lm: &LossMatrix, indices: &[usize]) -> RademacherEstimate {
    let l = indices.len();
    let scale = 2.0 / l as f64;
    let mut signs = vec![1.0f64; l];
    let mut sums = vec![0.0f64; lm.m()];
    for &i in indices {
        sums.iter_mut().zip(lm.row(i)).for_each(|(s, v)| *s += v);
    }
    let sup = |sums: &[f64]| sums.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let mut total = sup(&sums);
    let patterns: u64 = 1 << l;
    for step in 1..patterns {
        let bit = step.trailing_zeros() as usize;
        signs[bit] = -signs[bit];
        let delta = 2.0 * signs[bit];
        sums.iter_mut()
            .zip(lm.row(indices[bit]))
            .for_each(|(s, v)| *s += delta * v);
        total += sup(&sums);
    }
    RademacherEstimate {
        value: scale * total / patterns as f64,
        draws: patterns as usize,
        std_err: 0.0,
        l,
        exact: true,
    }
}

fn sign_draw(lm: &LossMatrix, indices: &[usize], seed: u64, sums: &mut [f64]) -> f64 {
    let mut r = rng(seed);
    sums.iter_mut().for_each(|s| *s = 0.0);
    let mut bits = 0u64;
    for (k, &i) in indices.iter().enumerate() {
        if k % 64 == 0 {
            bits = r.next_u64();
        }
        let sign = if bits & 1 == 1 { 1.0 } else { -1.0 };
        bits >>= 1;
        sums.iter_mut().zip(lm.row(i)).for_each(|(s, v)| *s += sign * v);
    }
    let sup = sums.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    2.0 * sup / indices.len() as f64
}

fn monte_carlo(lm: &LossMatrix, indices: &[usize], opts: RcOptions) -> RademacherEstimate {
    const CHUNK: usize = 64;
    let chunks = opts.draws.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<f64>> = map_indexed(opts.exec, chunks, |c| {
        let mut sums = vec![0.0; lm.m()];
        (c * CHUNK..((c + 1) * CHUNK).min(opts.draws))
            .map(|d| sign_draw(lm, indices, derive_seed(opts.seed, d as u64), &mut sums))
            .collect()
    });
    let samples: Vec<f64> = per_chunk.into_iter().flatten().collect();
    let (mean, std_err) = mean_and_std_err(&samples);
    RademacherEstimate {
        value: mean,
        draws: opts.draws,
        std_err,
        l: indices.len(),
        exact: false,
    }
}

pub(crate) fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages a set of estimates; standard errors combine as independent.
fn average(parts: &[(f64, RademacherEstimate)], l: usize, draws: usize) -> RademacherEstimate {
    let total_w: f64 = parts.iter().map(|(w, _)| w).sum();
    let value = parts.iter().map(|(w, e)| w * e.value).sum::<f64>() / total_w;
    let var = parts.iter().map(|(w, e)| (w * e.std_err).powi(2)).sum::<f64>() / (total_w * total_w);
    RademacherEstimate {
        value,
        draws,
        std_err: var.sqrt(),
        l,
        exact: parts.iter().all(|(_, e)| e.exact),
    }
}

/// Average over rounds of `RC(test)/2 + RC(train)/2`.
pub fn one_round_rc(lm: &LossMatrix, fa: &FoldAssignment, opts: RcOptions) -> Result<RademacherEstimate> {
    let mut parts = Vec::with_capacity(2 * fa.k);
    for (q, r) in fa.rounds.iter().enumerate() {
        let q = q as u64;
        parts.push((0.5, rademacher_complexity_with(lm, &r.test, opts.reseed(2 * q))?));
        parts.push((
            0.5,
            rademacher_complexity_with(lm, &r.train, opts.reseed(2 * q + 1))?,
        ));
    }
    Ok(average(&parts, fa.n_s, opts.draws))
}

/// RC over folds of exactly `floor(n/K)` points, averaged over the K folds.
///
/// Folds holding a remainder point are truncated to the common size.
pub fn per_fold_rc(lm: &LossMatrix, fa: &FoldAssignment, opts: RcOptions) -> Result<RademacherEstimate> {
    let size = fa.n_s;
    let mut parts = Vec::with_capacity(fa.k);
    for (q, r) in fa.rounds.iter().enumerate() {
        let idx = &r.test[..size.min(r.test.len())];
        parts.push((1.0, rademacher_complexity_with(lm, idx, opts.reseed(q as u64))?));
    }
    Ok(average(&parts, size, opts.draws))
}

/// RC on an arbitrary list of index sets, averaged with equal weight.
pub fn averaged_rc(lm: &LossMatrix, sets: &[Vec<usize>], opts: RcOptions) -> Result<RademacherEstimate> {
    if sets.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let mut parts = Vec::with_capacity(sets.len());
    for (q, s) in sets.iter().enumerate() {
        parts.push((1.0, rademacher_complexity_with(lm, s, opts.reseed(q as u64))?));
    }
    Ok(average(&parts, sets[0].len(), opts.draws))
}
