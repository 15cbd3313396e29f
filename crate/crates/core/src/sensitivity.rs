//! Sensitivity of randomization p-values to biased instrument assignment.
//!
//! Each unit's odds of `z = 1` may differ by at most a factor `gamma`: with
//! `n1` fixed, assignment `S` has probability proportional to
//! `gamma^(sum of u_i over S)` for an unobserved `u` in `[0, 1]^n`. The
//! bounds here range over the monotone binary confounders, `u = 1` on the
//! `k` units with the largest (or smallest) adjusted responses, and over all
//! effective strengths up to `gamma`.
//!
//! For each `k`, assignments are tabulated by `m`, the number of top-`k`
//! units they treat, once. Probabilities under any `gamma` are then ratios
//! of `gamma^m`-weighted sums. Under Monte Carlo the uniform draws (plus the
//! observed assignment) are reweighted, so `gamma = 1` returns the engine's
//! own p-value exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::exact::{adjusted_responses, StudentizedNull};
use crate::model::IvDataset;
use crate::permutation::PermutationEngine;
use crate::rank::{twice_midranks, RankNull};

/// Largest `gamma` searched by [`sensitivity_value`].
pub const MAX_GAMMA: f64 = 1e6;

/// Step in `ln gamma` of the scan for interior extrema of a weighted p-value.
const LOG_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaModel {
    gamma: f64,
}

impl GammaModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityStatistic {
    /// Two-sided studentized difference in means of `Y - tau0 D`.
    Studentized,
    /// Two-sided Wilcoxon rank sum of `Y - tau0 D`.
    RankSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueBounds {
    pub gamma: f64,
    pub p_low: f64,
    pub p_high: f64,
}

/// Counts of assignments by `m` (treated units among the top `k`), overall
/// and within the rejection event, for every candidate `k`.
struct Tables {
    /// `(k, total[m], event[m])`
    rows: Vec<(usize, Vec<f64>, Vec<f64>)>,
    /// Maps the event probability to the reported p-value.
    doubled: bool,
}

impl Tables {
    fn build(
        ds: &IvDataset,
        tau0: f64,
        stat: SensitivityStatistic,
        eng: &PermutationEngine,
    ) -> Result<Self> {
        ds.require_variance_arms()?;
        let (n, n1) = (ds.n(), ds.n1());
        let q = adjusted_responses(ds, tau0);

        // rejection indicator per assignment in plan order, and for the observed one
        let (plan, flags, doubled): (_, Box<dyn Fn(usize, &[usize]) -> bool + Sync>, bool) =
            match stat {
                SensitivityStatistic::Studentized => {
                    let null = StudentizedNull::new(ds, eng)?;
                    let (_, ex) = null.exceedances(tau0);
                    (*null.plan(), Box::new(move |i, _| ex[i]), false)
                }
                SensitivityStatistic::RankSum => {
                    let null = RankNull::new(ds, eng)?;
                    let ranks = twice_midranks(&q);
                    let obs: u64 = ranks.iter().zip(ds.z()).filter(|p| *p.1).map(|p| *p.0).sum();
                    // the tail that carries the two-sided p-value at gamma = 1
                    let twice_expected = (n1 * (n + 1)) as u64;
                    let upper = obs >= twice_expected;
                    let plan = *null.plan();
                    let f = move |_: usize, set: &[usize]| {
                        let s: u64 = set.iter().map(|&i| ranks[i]).sum();
                        if upper {
                            s >= obs
                        } else {
                            s <= obs
                        }
                    };
                    (plan, Box::new(f), true)
                }
            };

        // position of each unit when sorted by adjusted response, largest first
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| q[b].total_cmp(&q[a]));
        let mut position = vec![0usize; n];
        for (p, &u) in order.iter().enumerate() {
            position[u] = p;
        }
        let ks = candidate_ks(n);
        let width = n1 + 1;

        let record = |acc: &mut (Vec<u64>, Vec<u64>), set: &[usize], event: bool| {
            let mut pos: Vec<usize> = set.iter().map(|&i| position[i]).collect();
            pos.sort_unstable();
            let mut m = 0;
            for (row, &k) in ks.iter().enumerate() {
                while m < pos.len() && pos[m] < k {
                    m += 1;
                }
                acc.0[row * width + m] += 1;
                if event {
                    acc.1[row * width + m] += 1;
                }
            }
        };
        let zero = || (vec![0u64; ks.len() * width], vec![0u64; ks.len() * width]);
        let parts = plan.fold(zero, |acc, i, set| record(acc, set, flags(i, set)));
        let mut total = zero();
        for p in parts {
            for (t, v) in total.0.iter_mut().zip(p.0) {
                *t += v;
            }
            for (t, v) in total.1.iter_mut().zip(p.1) {
                *t += v;
            }
        }
        if !plan.is_exhaustive() {
            // the observed assignment joins the sampled ones; it always rejects
            let observed: Vec<usize> = (0..n).filter(|&i| ds.z()[i]).collect();
            record(&mut total, &observed, true);
        }

        let rows = ks
            .iter()
            .enumerate()
            .map(|(row, &k)| {
                let slice = |v: &[u64]| v[row * width..(row + 1) * width].iter().map(|&c| c as f64).collect();
                (k, slice(&total.0), slice(&total.1))
            })
            .collect();
        Ok(Self { rows, doubled })
    }

    fn report(&self, prob: f64) -> f64 {
        if self.doubled {
            (2.0 * prob).min(1.0)
        } else {
            prob
        }
    }

    fn uniform(&self) -> f64 {
        let (_, total, event) = &self.rows[0];
        self.report(event.iter().sum::<f64>() / total.iter().sum::<f64>())
    }

    /// Extremes of the rejection probability over every row, both
    /// directions and all `ln gamma'` in `[0, log_gamma]`.
    fn bounds(&self, gamma: f64) -> PValueBounds {
        let l = gamma.ln();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, total, event) in &self.rows {
            for dir in [1.0, -1.0] {
                let (a, b) = extremes(total, event, dir, l);
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        let p1 = self.uniform();
        PValueBounds {
            gamma,
            p_low: self.report(lo).min(p1),
            p_high: self.report(hi).max(p1),
        }
    }
}

/// `k` values for the top-`k` confounders: all of them up to 100 units,
/// otherwise 101 evenly spaced ones closed under `k -> n - k`.
fn candidate_ks(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = if n <= 100 {
        (0..=n).collect()
    } else {
        (0..=100).flat_map(|i| [i * n / 100, n - i * n / 100]).collect()
    };
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Probability of the event, and its derivative's sign, under weights
/// `exp(theta * m)`.
fn weighted(total: &[f64], event: &[f64], theta: f64) -> (f64, f64) {
    let live = |m: usize| total[m] > 0.0;
    let shift = (0..total.len())
        .filter(|&m| live(m))
        .map(|m| theta * m as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut t, mut e, mut tm, mut em) = (0.0, 0.0, 0.0, 0.0);
    for m in (0..total.len()).filter(|&m| live(m)) {
        let w = (theta * m as f64 - shift).exp();
        t += w * total[m];
        e += w * event[m];
        tm += w * total[m] * m as f64;
        em += w * event[m] * m as f64;
    }
    let p = e / t;
    // d p / d theta = E[1_A m] - E[1_A] E[m]
    (p, em / t - p * tm / t)
}

/// `(min, max)` of the weighted probability over `theta` in `[0, L]` with
/// weights `exp(dir * theta * m)`: endpoints, grid points and bisected
/// interior extrema, so the result is monotone in `L`.
fn extremes(total: &[f64], event: &[f64], dir: f64, l: f64) -> (f64, f64) {
    let f = |theta: f64| {
        let (p, dp) = weighted(total, event, dir * theta);
        (p, dir * dp)
    };
    let (p0, mut d_prev) = f(0.0);
    let (mut lo, mut hi) = (p0, p0);
    let steps = (l / LOG_STEP).floor() as usize;
    let mut prev = 0.0;
    let points = (1..=steps).map(|j| j as f64 * LOG_STEP).chain(std::iter::once(l));
    for theta in points {
        if theta <= prev {
            continue;
        }
        let (p, d) = f(theta);
        lo = lo.min(p);
        hi = hi.max(p);
        if (d_prev > 0.0) != (d > 0.0) && d_prev != 0.0 && d != 0.0 {
            // interior extremum in (prev, theta)
            let rising = d_prev > 0.0;
            let (mut a, mut b) = (prev, theta);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if (f(mid).1 > 0.0) == rising {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let pm = f(0.5 * (a + b)).0;
            lo = lo.min(pm);
            hi = hi.max(pm);
        }
        d_prev = d;
        prev = theta;
    }
    (lo, hi)
}

/// Bounds on the test's p-value over assignment laws with odds ratios at
/// most `gamma`.
pub fn gamma_pvalue_bounds(
    ds: &IvDataset,
    tau0: f64,
    gm: GammaModel,
    stat: SensitivityStatistic,
    eng: &PermutationEngine,
) -> Result<PValueBounds> {
    Ok(Tables::build(ds, tau0, stat, eng)?.bounds(gm.gamma))
}

/// [`gamma_pvalue_bounds`] for several `gamma`, sharing one tabulation.
pub fn gamma_sweep(
    ds: &IvDataset,
    tau0: f64,
    gammas: &[f64],
    stat: SensitivityStatistic,
    eng: &PermutationEngine,
) -> Result<Vec<PValueBounds>> {
    let models = gammas
        .iter()
        .map(|&g| GammaModel::new(g))
        .collect::<Result<Vec<_>>>()?;
    let tables = Tables::build(ds, tau0, stat, eng)?;
    Ok(models.iter().map(|m| tables.bounds(m.gamma)).collect())
}

/// Smallest `gamma` (to 0.01) at which the upper p-value bound exceeds
/// `alpha`. Returns 1 when the uniform p-value already exceeds `alpha`, and
/// infinity when no `gamma` up to [`MAX_GAMMA`] does.
pub fn sensitivity_value(
    ds: &IvDataset,
    tau0: f64,
    alpha: f64,
    stat: SensitivityStatistic,
    eng: &PermutationEngine,
) -> Result<f64> {
    check_alpha(alpha)?;
    let tables = Tables::build(ds, tau0, stat, eng)?;
    if tables.uniform() > alpha {
        return Ok(1.0);
    }
    let crosses = |g: f64| tables.bounds(g).p_high > alpha;
    let mut hi = 2.0;
    while !crosses(hi) {
        if hi >= MAX_GAMMA {
            return Ok(f64::INFINITY);
        }
        hi *= 2.0;
    }
    let mut lo = (hi / 2.0).max(1.0);
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if crosses(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::permutation_pvalue;
    use crate::rank::rank_test_pvalue;

    fn strong() -> IvDataset {
        let y = [3.1, 2.4, 3.9, 2.8, 3.3, 0.2, -0.4, 0.9, 0.1, 0.6];
        let z = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        IvDataset::new(y.to_vec(), z.to_vec(), &z).unwrap()
    }

    #[test]
    fn gamma_one_reproduces_the_uniform_pvalues() {
        let ds = strong();
        let eng = PermutationEngine::full_enumeration();
        let b = gamma_pvalue_bounds(&ds, 0.5, GammaModel::new(1.0).unwrap(), SensitivityStatistic::Studentized, &eng)
            .unwrap();
        let p = permutation_pvalue(&ds, 0.5, &eng).unwrap().p_value;
        assert_eq!((b.p_low, b.p_high), (p, p));

        let b = gamma_pvalue_bounds(&ds, 0.5, GammaModel::new(1.0).unwrap(), SensitivityStatistic::RankSum, &eng)
            .unwrap();
        let p = rank_test_pvalue(&ds, 0.5, &eng).unwrap().p_value;
        assert!((b.p_high - p).abs() < 1e-15 && (b.p_low - p).abs() < 1e-15);
    }

    #[test]
    fn bounds_widen_with_gamma() {
        let ds = strong();
        let eng = PermutationEngine::full_enumeration();
        for stat in [SensitivityStatistic::Studentized, SensitivityStatistic::RankSum] {
            let rows = gamma_sweep(&ds, 0.0, &[1.0, 1.5, 2.0, 3.0, 4.0], stat, &eng).unwrap();
            for w in rows.windows(2) {
                assert!(w[1].p_high >= w[0].p_high);
                assert!(w[1].p_low <= w[0].p_low);
            }
            let far = gamma_sweep(&ds, 0.0, &[1e6], stat, &eng).unwrap();
            assert!(far[0].p_high > 0.99, "{:?}", far[0]);
        }
    }

    #[test]
    fn sensitivity_value_cases() {
        let ds = strong();
        let eng = PermutationEngine::full_enumeration();
        let g = sensitivity_value(&ds, 0.0, 0.05, SensitivityStatistic::RankSum, &eng).unwrap();
        assert!(g > 1.0 && g.is_finite());
        // far from the truth the test does not reject: insensitive at the outset
        let g = sensitivity_value(&ds, 2.5, 0.05, SensitivityStatistic::RankSum, &eng).unwrap();
        assert_eq!(g, 1.0);
        assert!(GammaModel::new(0.5).is_err());
    }

    #[test]
    fn monte_carlo_gamma_one_matches_engine() {
        let y: Vec<f64> = (0..30).map(|i| ((i * 17) % 13) as f64 * 0.2 + (i % 2) as f64).collect();
        let z: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
        let ds = IvDataset::new(y, z.clone(), &z).unwrap();
        let eng = PermutationEngine::monte_carlo(2000, 5).unwrap();
        let b = gamma_pvalue_bounds(&ds, 0.3, GammaModel::new(1.0).unwrap(), SensitivityStatistic::Studentized, &eng)
            .unwrap();
        let p = permutation_pvalue(&ds, 0.3, &eng).unwrap().p_value;
        assert!((b.p_high - p).abs() < 1e-12 && (b.p_low - p).abs() < 1e-12);
    }
}
