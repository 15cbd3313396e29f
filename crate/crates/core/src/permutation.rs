//! Assignment spaces for randomization tests: exhaustive enumeration of all
//! `n1`-subsets, or uniform Monte Carlo sampling of them.
//!
//! Work is split into chunks indexed by position. Enumeration chunks start
//! from an unranked combination; Monte Carlo chunks draw from a ChaCha
//! stream keyed by `(seed, context, chunk)`. Results are concatenated in
//! chunk order, so output never depends on the rayon pool size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;
pub const DEFAULT_DRAWS: usize = 10_000;
pub const MIN_DRAWS: usize = 1_000;

const ENUM_CHUNK: u64 = 1 << 15;
const MC_CHUNK: usize = 1 << 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationMode {
    /// Every assignment in Ω; fails if `C(n, n1)` exceeds the cap.
    FullEnumeration,
    /// Uniformly sampled `n1`-subsets.
    MonteCarlo { draws: usize, seed: u64 },
    /// Enumeration when it fits under the cap, Monte Carlo otherwise.
    Auto { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationEngine {
    pub mode: PermutationMode,
    pub enumeration_cap: u64,
}

impl Default for PermutationEngine {
    fn default() -> Self {
        Self::auto(0)
    }
}

impl PermutationEngine {
    pub fn full_enumeration() -> Self {
        Self {
            mode: PermutationMode::FullEnumeration,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn monte_carlo(draws: usize, seed: u64) -> Result<Self> {
        if draws < MIN_DRAWS {
            return Err(Error::TooFewDraws(draws));
        }
        Ok(Self {
            mode: PermutationMode::MonteCarlo { draws, seed },
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    pub fn auto(seed: u64) -> Self {
        Self {
            mode: PermutationMode::Auto {
                draws: DEFAULT_DRAWS,
                seed,
            },
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.enumeration_cap = cap;
        self
    }

    /// Resolves the engine against a design with `n` units, `n1` treated.
    pub fn plan(&self, n: usize, n1: usize) -> Result<AssignmentPlan> {
        let size = binomial(n as u64, n1 as u64);
        let fits = size.is_some_and(|s| s <= self.enumeration_cap as u128);
        let sample = |draws: usize, seed: u64| {
            if draws < MIN_DRAWS {
                Err(Error::TooFewDraws(draws))
            } else {
                Ok(AssignmentPlan::Sample { n, n1, draws, seed })
            }
        };
        match self.mode {
            PermutationMode::FullEnumeration if fits => Ok(AssignmentPlan::Enumerate {
                n,
                n1,
                count: size.unwrap() as u64,
            }),
            PermutationMode::FullEnumeration => Err(Error::EnumerationTooLarge {
                size: size.unwrap_or(u128::MAX),
                cap: self.enumeration_cap,
            }),
            PermutationMode::MonteCarlo { draws, seed } => sample(draws, seed),
            PermutationMode::Auto { .. } if fits => Ok(AssignmentPlan::Enumerate {
                n,
                n1,
                count: size.unwrap() as u64,
            }),
            PermutationMode::Auto { draws, seed } => sample(draws, seed),
        }
    }
}

/// A concrete set of assignments to evaluate a statistic over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentPlan {
    Enumerate { n: usize, n1: usize, count: u64 },
    Sample { n: usize, n1: usize, draws: usize, seed: u64 },
}

impl AssignmentPlan {
    pub fn len(&self) -> usize {
        match *self {
            AssignmentPlan::Enumerate { count, .. } => count as usize,
            AssignmentPlan::Sample { draws, .. } => draws,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self, AssignmentPlan::Enumerate { .. })
    }

    pub fn n1(&self) -> usize {
        match *self {
            AssignmentPlan::Enumerate { n1, .. } | AssignmentPlan::Sample { n1, .. } => n1,
        }
    }

    /// p-value from the number of assignments at least as extreme as the
    /// observed one. Under enumeration the observed assignment is part of
    /// Ω (and of `count`); under sampling it is added as `+1`.
    pub fn p_value(&self, count: usize) -> f64 {
        match *self {
            AssignmentPlan::Enumerate { count: total, .. } => count as f64 / total as f64,
            AssignmentPlan::Sample { draws, .. } => (1 + count) as f64 / (draws + 1) as f64,
        }
    }

    /// Applies `f` to the treated index set of every assignment, in a fixed order.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[usize]) -> T + Sync,
    {
        self.fold(Vec::new, |out: &mut Vec<T>, _, set| out.push(f(set)))
            .into_iter()
            .flatten()
            .collect()
    }

    /// Folds every assignment into per-chunk accumulators, returned in chunk
    /// order. `f` also receives the assignment's position in the plan.
    pub(crate) fn fold<A, I, F>(&self, init: I, f: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, usize, &[usize]) + Sync,
    {
        match *self {
            AssignmentPlan::Enumerate { n, n1, count } => (0..count.div_ceil(ENUM_CHUNK))
                .into_par_iter()
                .map(|c| {
                    let start = c * ENUM_CHUNK;
                    let len = ENUM_CHUNK.min(count - start) as usize;
                    let mut idx = unrank_combination(n, n1, start);
                    let mut acc = init();
                    for i in 0..len {
                        if i > 0 {
                            next_combination(&mut idx, n);
                        }
                        f(&mut acc, start as usize + i, &idx);
                    }
                    acc
                })
                .collect(),
            AssignmentPlan::Sample { n, n1, draws, seed } => (0..draws.div_ceil(MC_CHUNK))
                .into_par_iter()
                .map(|c| {
                    let len = MC_CHUNK.min(draws - c * MC_CHUNK);
                    let mut rng = stream_rng(seed, 0, c as u64);
                    let mut perm: Vec<usize> = (0..n).collect();
                    let mut acc = init();
                    for i in 0..len {
                        partial_shuffle(&mut perm, n1, &mut rng);
                        f(&mut acc, c * MC_CHUNK + i, &perm[..n1]);
                    }
                    acc
                })
                .collect(),
        }
    }
}

/// `C(n, k)`, or `None` on u128 overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// Lexicographic unranking of `k`-subsets of `0..n`.
fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut x = 0usize;
    for j in 0..k {
        loop {
            let below = binomial((n - x - 1) as u64, (k - j - 1) as u64).unwrap_or(u128::MAX);
            if (rank as u128) < below {
                break;
            }
            rank -= below as u64;
            x += 1;
        }
        out.push(x);
        x += 1;
    }
    out
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Moves a uniformly random `k`-subset of `perm` into `perm[..k]`.
pub(crate) fn partial_shuffle<R: Rng>(perm: &mut [usize], k: usize, rng: &mut R) {
    let n = perm.len();
    for i in 0..k {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic substream for `(seed, context, index)`.
pub(crate) fn stream_rng(seed: u64, context: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(context.wrapping_mul(0xA24B_AED4_963E_E407)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(20, 10), Some(184_756));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(100, 50), Some(100_891_344_545_564_193_334_812_497_256));
        assert_eq!(binomial(1000, 500), None);
    }

    #[test]
    fn enumeration_visits_each_subset_once_across_chunks() {
        let plan = AssignmentPlan::Enumerate {
            n: 22,
            n1: 5,
            count: 26_334,
        };
        let sets = plan.map(|s| s.to_vec());
        assert_eq!(sets.len(), 26_334);
        let unique: HashSet<Vec<usize>> = sets.iter().cloned().collect();
        assert_eq!(unique.len(), 26_334);
        assert!(sets.windows(2).all(|w| w[0] < w[1]));

        let big = AssignmentPlan::Enumerate {
            n: 20,
            n1: 10,
            count: 184_756,
        };
        let sets = big.map(|s| s.to_vec());
        assert!(sets.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sets.last().unwrap(), &(10..20).collect::<Vec<_>>());
    }

    #[test]
    fn engine_resolution() {
        let e = PermutationEngine::full_enumeration();
        assert!(e.plan(10, 5).unwrap().is_exhaustive());
        assert!(matches!(
            e.with_cap(100).plan(10, 5),
            Err(Error::EnumerationTooLarge { size: 252, cap: 100 })
        ));
        let a = PermutationEngine::auto(3).with_cap(100);
        assert_eq!(a.plan(10, 5).unwrap().len(), DEFAULT_DRAWS);
        assert!(PermutationEngine::monte_carlo(10, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_uniform_over_units() {
        let plan = AssignmentPlan::Sample {
            n: 10,
            n1: 3,
            draws: 20_000,
            seed: 42,
        };
        let a = plan.map(|s| s.to_vec());
        let b = plan.map(|s| s.to_vec());
        assert_eq!(a, b);
        let mut hits = [0usize; 10];
        for s in &a {
            assert_eq!(s.len(), 3);
            for &i in s {
                hits[i] += 1;
            }
        }
        // each unit is treated with probability 0.3
        for h in hits {
            let p = h as f64 / 20_000.0;
            assert!((p - 0.3).abs() < 0.015, "{p}");
        }
    }
}
