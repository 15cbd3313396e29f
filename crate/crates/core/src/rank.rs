//! Rank-based inference under the proportional-dose model `Y = W + beta D`,
//! where the adjusted responses `W = Y - beta0 D` do not depend on the
//! assignment when `beta0` is the true effect.
//!
//! Ranks are mid-ranks. They are stored doubled so that ties stay integral,
//! which lets the exact null distribution be counted by a subset-sum
//! recursion instead of visiting every assignment.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::exact::{adjusted_responses, base_diagnostics, default_bracket};
use crate::inversion::{excess_pieces, invert, GridSpec};
use crate::model::{InferenceResult, IvDataset, Method};
use crate::permutation::{AssignmentPlan, PermutationEngine};
use crate::TestResult;

/// Proportional-dose effect: each unit of `D` moves `Y` by `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectModel {
    pub beta: f64,
}

impl EffectModel {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidConfig(format!("effect must be finite, got {beta}")));
        }
        Ok(Self { beta })
    }

    /// Responses with the hypothesised effect removed.
    pub fn adjust(&self, ds: &IvDataset) -> Vec<f64> {
        rank_adjusted(ds, self.beta)
    }
}

/// `W_i = Y_i - beta0 D_i`.
pub fn rank_adjusted(ds: &IvDataset, beta0: f64) -> Vec<f64> {
    adjusted_responses(ds, beta0)
}

/// Doubled mid-ranks of `w` (ranks start at 1).
pub(crate) fn twice_midranks(w: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    ranks_from_order(&idx, |a, b| w[a] == w[b])
}

/// Doubled mid-ranks for units already sorted by `order`; `tied` decides
/// whether neighbours share a rank.
fn ranks_from_order(order: &[usize], tied: impl Fn(usize, usize) -> bool) -> Vec<u64> {
    let mut r = vec![0u64; order.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && tied(order[i], order[j + 1]) {
            j += 1;
        }
        // positions i..=j share rank ((i + 1) + (j + 1)) / 2
        let twice = (i + j + 2) as u64;
        for &u in &order[i..=j] {
            r[u] = twice;
        }
        i = j + 1;
    }
    r
}

/// Doubled mid-ranks of `W` in the limit `beta0 -> +inf` (`sign = 1`) or
/// `-inf` (`sign = -1`): the order is by `-sign * d`, then by `y`.
fn limit_ranks(ds: &IvDataset, sign: f64) -> Vec<u64> {
    let (y, d) = (ds.y(), ds.d());
    let key = |i: usize| (-sign * d[i], y[i]);
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    ranks_from_order(&idx, |a, b| key(a) == key(b))
}

/// Sum of mid-ranks over units with `z = 1`.
pub fn wilcoxon_rank_sum(w: &[f64], z: &[bool]) -> f64 {
    let r = twice_midranks(w);
    let s: u64 = r.iter().zip(z).filter(|p| *p.1).map(|p| *p.0).sum();
    s as f64 / 2.0
}

/// Exact null distribution of the doubled rank sum of a uniformly random
/// `n1`-subset: `counts[s]` subsets have sum `s`.
#[derive(Debug)]
struct RankSumDistribution {
    counts: Vec<u128>,
    total: u128,
}

impl RankSumDistribution {
    fn new(ranks: &[u64], n1: usize) -> Self {
        let mut sorted = ranks.to_vec();
        sorted.sort_unstable();
        let max_sum: u64 = sorted.iter().rev().take(n1).sum();
        let width = max_sum as usize + 1;
        // table[k][s]: subsets of size k with sum s among the items seen so far
        let mut table = vec![vec![0u128; width]; n1 + 1];
        table[0][0] = 1;
        for (seen, &r) in sorted.iter().enumerate() {
            let r = r as usize;
            for k in (1..=n1.min(seen + 1)).rev() {
                let (lower, upper) = table.split_at_mut(k);
                let (src, dst) = (&lower[k - 1], &mut upper[0]);
                for s in (r..width).rev() {
                    if src[s - r] != 0 {
                        dst[s] += src[s - r];
                    }
                }
            }
        }
        let counts = table.pop().expect("n1 + 1 rows");
        let total = counts.iter().sum();
        Self { counts, total }
    }

    /// Two-sided p-value: twice the smaller tail, capped at 1.
    fn p_value(&self, observed: u64) -> f64 {
        let obs = observed as usize;
        let lower: u128 = self.counts[..=obs.min(self.counts.len() - 1)].iter().sum();
        let upper: u128 = self.counts.get(obs..).map_or(0, |c| c.iter().sum());
        let tail = lower.min(upper) as f64 / self.total as f64;
        (2.0 * tail).min(1.0)
    }
}

/// Null distribution machinery shared across `beta0` values: cached exact
/// distributions per tie pattern, or one fixed set of sampled assignments.
pub(crate) struct RankNull {
    plan: AssignmentPlan,
    z: Vec<bool>,
    n1: usize,
    draws: Vec<Vec<usize>>,
    cache: Mutex<HashMap<Vec<u64>, Arc<RankSumDistribution>>>,
}

impl RankNull {
    pub fn new(ds: &IvDataset, eng: &PermutationEngine) -> Result<Self> {
        let plan = eng.plan(ds.n(), ds.n1())?;
        let draws = if plan.is_exhaustive() {
            Vec::new()
        } else {
            plan.map(|s| s.to_vec())
        };
        Ok(Self {
            plan,
            z: ds.z().to_vec(),
            n1: ds.n1(),
            draws,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn plan(&self) -> &AssignmentPlan {
        &self.plan
    }

    fn observed(&self, ranks: &[u64]) -> u64 {
        ranks.iter().zip(&self.z).filter(|p| *p.1).map(|p| *p.0).sum()
    }

    pub fn p_value(&self, ranks: &[u64]) -> f64 {
        let obs = self.observed(ranks);
        if self.plan.is_exhaustive() {
            let mut pattern = ranks.to_vec();
            pattern.sort_unstable();
            let dist = {
                let mut cache = self.cache.lock().expect("cache lock");
                cache
                    .entry(pattern)
                    .or_insert_with_key(|p| Arc::new(RankSumDistribution::new(p, self.n1)))
                    .clone()
            };
            dist.p_value(obs)
        } else {
            let (mut le, mut ge) = (0usize, 0usize);
            for set in &self.draws {
                let s: u64 = set.iter().map(|&i| ranks[i]).sum();
                le += (s <= obs) as usize;
                ge += (s >= obs) as usize;
            }
            let tail = self.plan.p_value(le).min(self.plan.p_value(ge));
            (2.0 * tail).min(1.0)
        }
    }

    pub fn test(&self, w: &[f64]) -> TestResult {
        let ranks = twice_midranks(w);
        TestResult {
            t_obs: self.observed(&ranks) as f64 / 2.0,
            p_value: self.p_value(&ranks),
            n_draws: self.plan.len(),
        }
    }
}

/// Two-sided rank-sum p-value for `H0: beta = beta0`.
pub fn rank_test_pvalue(ds: &IvDataset, beta0: f64, eng: &PermutationEngine) -> Result<TestResult> {
    Ok(RankNull::new(ds, eng)?.test(&rank_adjusted(ds, beta0)))
}

/// `{beta0 : p(beta0) >= alpha}` for the rank-sum test.
pub fn rank_ci(
    ds: &IvDataset,
    alpha: f64,
    eng: &PermutationEngine,
    grid: &GridSpec,
) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let null = RankNull::new(ds, eng)?;
    let p_pos = null.p_value(&limit_ranks(ds, 1.0));
    let p_neg = null.p_value(&limit_ranks(ds, -1.0));
    let bracket = grid.bracket.unwrap_or_else(|| default_bracket(ds, alpha));
    let inv = invert(
        |b| null.test(&rank_adjusted(ds, b)).p_value,
        p_neg,
        p_pos,
        alpha,
        grid,
        bracket,
    )?;
    let mut diagnostics = base_diagnostics(ds);
    diagnostics.n_permutations = Some(null.plan.len() as u64);
    diagnostics.disjoint_pieces = excess_pieces(&inv);
    Ok(InferenceResult {
        method: Method::Rank,
        point: hodges_lehmann(ds).ok(),
        interval: inv.set,
        alpha,
        diagnostics,
    })
}

/// Beyond this `|beta0|` the order of `W` is its limiting order.
fn ordering_radius(ds: &IvDataset) -> Option<f64> {
    let mut d = ds.d().to_vec();
    d.sort_by(f64::total_cmp);
    let gap = d
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !gap.is_finite() {
        return None;
    }
    let (lo, hi) = ds
        .y()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Some(2.0 * (hi - lo) / gap + 1.0)
}

/// Hodges-Lehmann estimate: the `beta0` at which the rank sum crosses its
/// null expectation `n1 (n + 1) / 2`, taking the midpoint of any flat
/// stretch at the crossing.
pub fn hodges_lehmann(ds: &IvDataset) -> Result<f64> {
    let twice_expected = (ds.n1() * (ds.n() + 1)) as i64;
    let z = ds.z();
    let excess = |ranks: &[u64]| -> i64 {
        let s: u64 = ranks.iter().zip(z).filter(|p| *p.1).map(|p| *p.0).sum();
        s as i64 - twice_expected
    };
    let radius = ordering_radius(ds).ok_or(Error::Unidentified)?;
    let lo_excess = excess(&limit_ranks(ds, -1.0));
    let hi_excess = excess(&limit_ranks(ds, 1.0));
    // orient so the statistic runs from above expectation to below
    let sign = match (lo_excess.signum(), hi_excess.signum()) {
        (1, -1) => 1,
        (-1, 1) => -1,
        _ => return Err(Error::Unidentified),
    };
    let f = |b: f64| sign * excess(&twice_midranks(&rank_adjusted(ds, b)));

    let tol = 1e-13 * radius;
    // last beta with excess > 0, and first beta with excess < 0
    let crossing = |above: &dyn Fn(i64) -> bool| {
        let (mut lo, mut hi) = (-radius, radius);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if above(f(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let beta_a = crossing(&|e| e > 0);
    let beta_b = crossing(&|e| e >= 0);
    Ok(0.5 * (beta_a + beta_b))
}
