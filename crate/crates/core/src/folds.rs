//! K-fold partitions and the alternating independent-blocks layout.

use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Random,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// The K rounds of one cross-validation split.
///
/// `n_s` is the conservative test size `floor(n / K)` used by every bound
/// formula; `n_t = n - n_s`. Individual test folds may hold one extra point
/// when K does not divide n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub scheme: Scheme,
    pub n: usize,
    pub k: usize,
    pub n_t: usize,
    pub n_s: usize,
    pub n_tilde: usize,
    pub seed: Option<u64>,
    pub rounds: Vec<Round>,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::BadK { k, n });
    }
    Ok(())
}

fn assemble(scheme: Scheme, n: usize, tests: Vec<Vec<usize>>, seed: Option<u64>) -> FoldAssignment {
    let k = tests.len();
    let n_s = n / k;
    let n_t = n - n_s;
    let rounds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Round { train, test }
        })
        .collect();
    FoldAssignment {
        scheme,
        n,
        k,
        n_t,
        n_s,
        n_tilde: n_s.min(n_t),
        seed,
        rounds,
    }
}

/// Fold sizes: the first `n mod K` folds receive one extra point.
fn fold_sizes(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |q| n / k + usize::from(q < n % k))
}

/// Uniformly random partition of `0..n` into K near-equal test folds.
pub fn random_kfold(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    check_k(n, k)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng(seed));
    let mut tests = Vec::with_capacity(k);
    let mut start = 0;
    for size in fold_sizes(n, k) {
        tests.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(assemble(Scheme::Random, n, tests, Some(seed)))
}

/// One side (training or test) of the alternating block layout.
///
/// Ranges are 0-based positions within the side's own sequence; block `i`
/// of family 0 covers `[2ia, (2i+1)a)` and block `i` of family 1 covers
/// `[(2i+1)a, (2i+2)a)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideBlocks {
    pub a: usize,
    pub family0: Vec<Range<usize>>,
    pub family1: Vec<Range<usize>>,
}

impl SideBlocks {
    /// Any `mu >= 1`; the bounds themselves need `mu > 1` (see [`block_layout`]).
    pub fn new(len: usize, mu: usize) -> Result<Self> {
        if mu == 0 {
            return Err(Error::MuTooSmall { mu });
        }
        if len == 0 || !len.is_multiple_of(2 * mu) {
            return Err(Error::IndivisibleBlocks { len, divisor: 2 * mu });
        }
        let a = len / (2 * mu);
        let family0 = (0..mu).map(|i| 2 * i * a..(2 * i + 1) * a).collect();
        let family1 = (0..mu).map(|i| (2 * i + 1) * a..(2 * i + 2) * a).collect();
        Ok(Self { a, family0, family1 })
    }

    pub fn mu(&self) -> usize {
        self.family0.len()
    }

    /// Positions of family 0 mapped through `sequence`.
    pub fn family0_indices(&self, sequence: &[usize]) -> Vec<usize> {
        gather(&self.family0, sequence)
    }

    pub fn family1_indices(&self, sequence: &[usize]) -> Vec<usize> {
        gather(&self.family1, sequence)
    }
}

fn gather(blocks: &[Range<usize>], sequence: &[usize]) -> Vec<usize> {
    blocks
        .iter()
        .flat_map(|r| sequence[r.clone()].iter().copied())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub mu: usize,
    pub train: SideBlocks,
    pub test: SideBlocks,
}

impl BlockLayout {
    pub fn a_t(&self) -> usize {
        self.train.a
    }

    pub fn a_s(&self) -> usize {
        self.test.a
    }
}

/// Splits a training run of `n_t` and a test run of `n_s` points into
/// `mu` block pairs each.
pub fn block_layout(n_t: usize, n_s: usize, mu: usize) -> Result<BlockLayout> {
    if mu < 2 {
        return Err(Error::MuTooSmall { mu });
    }
    Ok(BlockLayout {
        mu,
        train: SideBlocks::new(n_t, mu)?,
        test: SideBlocks::new(n_s, mu)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedFolds {
    pub folds: FoldAssignment,
    /// All rounds share the same shape, hence one layout.
    pub layout: BlockLayout,
}

impl BlockedFolds {
    /// Absolute row indices of the training family-0 blocks in round `q`.
    pub fn train_family0(&self, q: usize) -> Vec<usize> {
        self.layout.train.family0_indices(&self.folds.rounds[q].train)
    }

    pub fn test_family0(&self, q: usize) -> Vec<usize> {
        self.layout.test.family0_indices(&self.folds.rounds[q].test)
    }

    pub fn train_family1(&self, q: usize) -> Vec<usize> {
        self.layout.train.family1_indices(&self.folds.rounds[q].train)
    }

    pub fn test_family1(&self, q: usize) -> Vec<usize> {
        self.layout.test.family1_indices(&self.folds.rounds[q].test)
    }
}

/// Contiguous folds for temporal data, each side blocked into `mu` pairs.
///
/// Round `q` tests on the `q`-th contiguous chunk and trains on the rest in
/// index order. K must divide n.
pub fn blocked_kfold(n: usize, k: usize, mu: usize) -> Result<BlockedFolds> {
    check_k(n, k)?;
    if !n.is_multiple_of(k) {
        return Err(Error::IndivisibleBlocks { len: n, divisor: k });
    }
    let n_s = n / k;
    let layout = block_layout(n - n_s, n_s, mu)?;
    let tests = (0..k).map(|q| (q * n_s..(q + 1) * n_s).collect()).collect();
    Ok(BlockedFolds {
        folds: assemble(Scheme::Blocked, n, tests, None),
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_split() {
        let fa = random_kfold(4, 2, 11).unwrap();
        assert_eq!(fa.rounds.len(), 2);
        for r in &fa.rounds {
            assert_eq!(r.test.len(), 2);
            assert_eq!(r.train.len(), 2);
            assert!(r.test.iter().all(|i| !r.train.contains(i)));
        }
        assert_eq!((fa.n_s, fa.n_t, fa.n_tilde), (2, 2, 2));
    }

    #[test]
    fn remainder_goes_to_first_folds() {
        let fa = random_kfold(5, 2, 3).unwrap();
        let sizes: Vec<usize> = fa.rounds.iter().map(|r| r.test.len()).collect();
        assert_eq!(sizes, vec![3, 2]);
        let mut all: Vec<usize> = fa.rounds.iter().flat_map(|r| r.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert_eq!(fa.n_s, 2);
        assert_eq!(fa.n_t, 3);
    }

    #[test]
    fn leave_one_out() {
        let fa = random_kfold(3, 3, 0).unwrap();
        let mut tests: Vec<usize> = fa
            .rounds
            .iter()
            .map(|r| {
                assert_eq!(r.test.len(), 1);
                r.test[0]
            })
            .collect();
        tests.sort_unstable();
        assert_eq!(tests, vec![0, 1, 2]);
    }

    #[test]
    fn bad_k() {
        assert_eq!(random_kfold(5, 1, 0).unwrap_err(), Error::BadK { k: 1, n: 5 });
        assert_eq!(random_kfold(5, 6, 0).unwrap_err(), Error::BadK { k: 6, n: 5 });
    }

    #[test]
    fn alternating_blocks() {
        let side = SideBlocks::new(8, 2).unwrap();
        assert_eq!(side.a, 2);
        assert_eq!(side.family0, vec![0..2, 4..6]);
        assert_eq!(side.family1, vec![2..4, 6..8]);
        let side = SideBlocks::new(4, 2).unwrap();
        assert_eq!(side.family0, vec![0..1, 2..3]);
        assert_eq!(
            SideBlocks::new(6, 2).unwrap_err(),
            Error::IndivisibleBlocks { len: 6, divisor: 4 }
        );
        assert_eq!(block_layout(8, 8, 1).unwrap_err(), Error::MuTooSmall { mu: 1 });
    }

    #[test]
    fn blocked_examples() {
        let b = blocked_kfold(16, 2, 2).unwrap();
        assert_eq!(b.folds.rounds[0].test, (0..8).collect::<Vec<_>>());
        assert_eq!(b.folds.rounds[1].test, (8..16).collect::<Vec<_>>());
        assert_eq!((b.layout.a_t(), b.layout.a_s()), (2, 2));
        // Round 1 trains on 0..8: family 0 is {0,1} and {4,5}.
        assert_eq!(b.train_family0(1), vec![0, 1, 4, 5]);
        assert_eq!(b.test_family0(1), vec![8, 9, 12, 13]);

        let b = blocked_kfold(16, 4, 2).unwrap();
        assert_eq!(b.folds.n_s, 4);
        assert_eq!(b.layout.a_s(), 1);
        assert_eq!(b.layout.a_t(), 3);
        // Round 1 trains on 0..4 ++ 8..16.
        assert_eq!(b.train_family0(1), vec![0, 1, 2, 10, 11, 12]);

        assert_eq!(
            blocked_kfold(10, 2, 2).unwrap_err(),
            Error::IndivisibleBlocks { len: 5, divisor: 4 }
        );
    }
}
