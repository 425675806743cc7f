//! Data-parallel map with a sequential fallback.
//!
//! Every parallel site in the crate goes through [`map_indexed`]. Work items
//! are addressed by index and own their RNG stream (see [`derive_seed`]), and
//! results are collected in index order, so the output of a computation does
//! not depend on the executor or on the thread count.

use serde::{Deserialize, Serialize};

/// How independent work items are scheduled.
///
/// `Parallel` runs on the rayon pool when the `parallel` feature is enabled
/// and degrades to `Sequential` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(0..len)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Exec::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// SplitMix64 finalizer over `(master, stream)`.
///
/// Gives every work item its own seed; distinct streams map to
/// well-separated seeds even for consecutive inputs.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: usize| derive_seed(7, i as u64) % 1000;
        assert_eq!(
            map_indexed(Exec::Sequential, 500, f),
            map_indexed(Exec::Parallel, 500, f)
        );
    }

    #[test]
    fn streams_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|s| derive_seed(1, s)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
