//! The exact method: a studentized difference in means of adjusted
//! responses `Q(tau0) = Y - D tau0`, referred to its permutation
//! distribution over instrument assignments, and inverted over `tau0`.

use serde::{Deserialize, Serialize};

use crate::almost_exact::almost_exact_ci;
use crate::asymptotic::tsls_ci;
use crate::error::{check_alpha, Error, Result};
use crate::estimators::{instrument_t_stat, moment_summary, wald_estimate};
use crate::inversion::{invert, GridSpec};
use crate::model::{Diagnostics, InferenceResult, IntervalSet, IvDataset, Method};
use crate::permutation::{AssignmentPlan, PermutationEngine};

/// Relative tolerance for ties between permuted and observed statistics.
pub(crate) const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Observed `|T / S|`.
    pub t_obs: f64,
    pub p_value: f64,
    /// Assignments the null distribution was built from.
    pub n_draws: usize,
}

/// `Q_i = Y_i - D_i tau0`.
pub fn adjusted_responses(ds: &IvDataset, tau0: f64) -> Vec<f64> {
    ds.y().iter().zip(ds.d()).map(|(y, d)| y - d * tau0).collect()
}

/// Difference in arm means `T` and its standard error `S`, with
/// `S^2 = s1^2 / n1 + s0^2 / n0`.
pub fn studentized_statistic(q: &[f64], z: &[bool]) -> Result<(f64, f64)> {
    if q.len() != z.len() {
        return Err(Error::LengthMismatch {
            y: q.len(),
            d: q.len(),
            z: z.len(),
        });
    }
    let arm = |t: bool| {
        let v: Vec<f64> = q.iter().zip(z).filter(|p| *p.1 == t).map(|p| *p.0).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        (v.len(), mean, ss / (n * (n - 1.0)))
    };
    let (n1, m1, v1) = arm(true);
    let (n0, m0, v0) = arm(false);
    if n1 < 2 || n0 < 2 {
        return Err(Error::DegenerateArm { n1, n0 });
    }
    Ok((m1 - m0, (v1 + v0).sqrt()))
}

/// `|T / S|` with the degenerate conventions `0/0 = 0` and `x/0 = inf`.
pub(crate) fn abs_ratio(t: f64, s: f64, t_zero: f64, s_zero: f64) -> f64 {
    if s <= s_zero {
        if t.abs() <= t_zero {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        t.abs() / s
    }
}

/// `a >= b` up to the tie tolerance.
pub(crate) fn at_least(a: f64, b: f64) -> bool {
    a >= b * (1.0 - TIE_TOLERANCE)
}

/// Treated-set sums of centred `y`, `d` and their products for every
/// assignment of a plan. Any adjusted response `q = alpha y + beta d` has its
/// studentized statistic determined by these five numbers, so the null
/// distribution at each `tau0` costs a handful of flops per assignment.
pub(crate) struct StudentizedNull {
    plan: AssignmentPlan,
    sums: Vec<[f64; 5]>,
    observed: [f64; 5],
    /// Whole-sample sums of `y^2`, `y d`, `d^2` (centred).
    total: [f64; 3],
    n: usize,
    n1: usize,
    d_constant: bool,
    /// Effect size beyond which the assignment order is its limiting order.
    far_tau: f64,
}

impl StudentizedNull {
    pub fn new(ds: &IvDataset, eng: &PermutationEngine) -> Result<Self> {
        ds.require_variance_arms()?;
        let plan = eng.plan(ds.n(), ds.n1())?;
        let n = ds.n();
        let my = ds.y().iter().sum::<f64>() / n as f64;
        let md = ds.d().iter().sum::<f64>() / n as f64;
        let yc: Vec<f64> = ds.y().iter().map(|v| v - my).collect();
        let dc: Vec<f64> = ds.d().iter().map(|v| v - md).collect();
        let accumulate = |idx: &mut dyn Iterator<Item = usize>| {
            let mut s = [0.0; 5];
            for i in idx {
                let (y, d) = (yc[i], dc[i]);
                s[0] += y;
                s[1] += d;
                s[2] += y * y;
                s[3] += y * d;
                s[4] += d * d;
            }
            s
        };
        let sums = plan.map(|set| accumulate(&mut set.iter().copied()));
        let observed = accumulate(&mut (0..n).filter(|&i| ds.z()[i]));
        let all = accumulate(&mut (0..n));
        let d_constant = ds.d().iter().all(|&v| v == ds.d()[0]);
        let far_tau = far_effect(ds);
        Ok(Self {
            plan,
            sums,
            observed,
            total: [all[2], all[3], all[4]],
            n,
            n1: ds.n1(),
            d_constant,
            far_tau,
        })
    }

    pub fn plan(&self) -> &AssignmentPlan {
        &self.plan
    }

    /// Prepared evaluator for `q = a y + b d`.
    fn kernel(&self, a: f64, b: f64) -> impl Fn(&[f64; 5]) -> f64 {
        let (n, n1) = (self.n as f64, self.n1 as f64);
        let n0 = n - n1;
        let [tyy, tyd, tdd] = self.total;
        let tqq = a * a * tyy + 2.0 * a * b * tyd + b * b * tdd;
        let scale = a.abs() * (tyy / n).sqrt() + b.abs() * (tdd / n).sqrt();
        let t_zero = 1e-9 * scale;
        // squared-sum cancellation leaves noise of order 1e-16 scale^2 in S^2
        let s_zero = 1e-6 * scale / n.sqrt();
        let (k1, k0) = (1.0 / (n1 * (n1 - 1.0)), 1.0 / (n0 * (n0 - 1.0)));
        let tf = 1.0 / n1 + 1.0 / n0;
        move |s: &[f64; 5]| {
            let sq = a * s[0] + b * s[1];
            let sqq = a * a * s[2] + 2.0 * a * b * s[3] + b * b * s[4];
            let t = sq * tf;
            let ss1 = (sqq - sq * sq / n1).max(0.0);
            let ss0 = (tqq - sqq - sq * sq / n0).max(0.0);
            abs_ratio(t, (ss1 * k1 + ss0 * k0).sqrt(), t_zero, s_zero)
        }
    }

    /// Observed statistic and p-value for `q = a y + b d`.
    pub fn test(&self, a: f64, b: f64) -> (f64, f64) {
        let f = self.kernel(a, b);
        let t_obs = f(&self.observed);
        let count = self.sums.iter().filter(|s| at_least(f(s), t_obs)).count();
        (t_obs, self.plan.p_value(count))
    }

    /// Per assignment, in plan order: is `|T/S|` at least the observed value?
    pub fn exceedances(&self, tau0: f64) -> (f64, Vec<bool>) {
        let f = self.kernel(1.0, -tau0);
        let t_obs = f(&self.observed);
        (t_obs, self.sums.iter().map(|s| at_least(f(s), t_obs)).collect())
    }

    pub fn at(&self, tau0: f64) -> TestResult {
        let (t_obs, p_value) = self.test(1.0, -tau0);
        TestResult {
            t_obs,
            p_value,
            n_draws: self.plan.len(),
        }
    }

    /// p-value as `tau0 -> sign * inf`. The statistic of `-tau0 d` dominates
    /// but, for discrete `d`, ties heavily across assignments; those ties are
    /// broken by the `y` term at first order in `1 / tau0`, which depends on
    /// the direction. Evaluating `q = y / far - sign d` far beyond every
    /// crossing of the per-assignment curves keeps that tie-break while the
    /// first-order gaps stay far above the tie tolerance. With constant `d`
    /// the adjusted response is a shift of `y`.
    pub fn limit(&self, sign: f64) -> f64 {
        if self.d_constant {
            self.test(1.0, 0.0).1
        } else {
            self.test(1.0 / self.far_tau, -sign).1
        }
    }
}

pub fn permutation_pvalue(ds: &IvDataset, tau0: f64, eng: &PermutationEngine) -> Result<TestResult> {
    Ok(StudentizedNull::new(ds, eng)?.at(tau0))
}

/// `1e5 (range(y) / min gap(d) + |wald|)`, where the limiting order of the
/// statistics across assignments has long been reached.
fn far_effect(ds: &IvDataset) -> f64 {
    let (lo, hi) = ds
        .y()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut d = ds.d().to_vec();
    d.sort_by(f64::total_cmp);
    let gap = d
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let span = (hi - lo) / gap + wald_estimate(ds).map_or(0.0, f64::abs);
    if span.is_finite() && span > 0.0 {
        1e5 * span
    } else {
        1.0
    }
}

/// Search bracket: the almost-exact interval widened threefold about its
/// centre, otherwise the Wald estimate plus or minus ten TSLS half-widths.
pub(crate) fn default_bracket(ds: &IvDataset, alpha: f64) -> (f64, f64) {
    if let Ok(r) = almost_exact_ci(ds, alpha) {
        if let IntervalSet::Bounded { lo, hi } = r.interval {
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            if h > 0.0 {
                return (c - 3.0 * h, c + 3.0 * h);
            }
        }
    }
    if let Ok(r) = tsls_ci(ds, alpha) {
        if let IntervalSet::Bounded { lo, hi } = r.interval {
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            if h > 0.0 && h.is_finite() {
                return (c - 10.0 * h, c + 10.0 * h);
            }
        }
    }
    let range = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
        hi - lo
    };
    let (ry, rd) = (range(ds.y()), range(ds.d()));
    let w = if rd > 0.0 { 10.0 * (ry.max(1.0)) / rd } else { 10.0 * ry.max(1.0) };
    let c = wald_estimate(ds).unwrap_or(0.0);
    (c - w, c + w)
}

pub(crate) fn base_diagnostics(ds: &IvDataset) -> Diagnostics {
    let instrument_t = moment_summary(ds)
        .and_then(|ms| instrument_t_stat(&ms))
        .unwrap_or(0.0);
    Diagnostics {
        instrument_t,
        ..Diagnostics::default()
    }
}

/// `{tau0 : p(tau0) >= alpha}` for the studentized permutation test.
pub fn exact_ci(
    ds: &IvDataset,
    alpha: f64,
    eng: &PermutationEngine,
    grid: &GridSpec,
) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let null = StudentizedNull::new(ds, eng)?;
    let bracket = grid.bracket.unwrap_or_else(|| default_bracket(ds, alpha));
    let (p_neg, p_pos) = (null.limit(-1.0), null.limit(1.0));
    let inv = invert(|t| null.at(t).p_value, p_neg, p_pos, alpha, grid, bracket)?;
    let mut diagnostics = base_diagnostics(ds);
    diagnostics.n_permutations = Some(null.plan().len() as u64);
    diagnostics.disjoint_pieces = crate::inversion::excess_pieces(&inv);
    Ok(InferenceResult {
        method: Method::Exact,
        point: wald_estimate(ds).ok(),
        interval: inv.set,
        alpha,
        diagnostics,
    })
}
