//! Confidence sets by test inversion: `{x : p(x) >= alpha}` resolved on a
//! coarse grid, with bisection on every retain/reject boundary.

use crate::error::{Error, Result};
use crate::model::IntervalSet;

/// Grid search settings for test inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Initial search bracket. `None` lets each method pick one from the data.
    pub bracket: Option<(f64, f64)>,
    pub coarse_points: usize,
    /// Endpoint precision, relative to the width of the initial bracket.
    pub refine_tolerance: f64,
    /// Bisection steps allowed per endpoint.
    pub max_refinements: usize,
    /// Bracket doublings allowed when retention reaches a grid edge that the
    /// limiting p-value says should be rejected (or vice versa).
    pub max_expansions: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            bracket: None,
            coarse_points: 200,
            refine_tolerance: 1e-6,
            max_refinements: 60,
            max_expansions: 40,
        }
    }
}

impl GridSpec {
    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.bracket = Some((lo, hi));
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.coarse_points < 50 {
            return Err(Error::InvalidConfig(format!(
                "coarse_points must be >= 50, got {}",
                self.coarse_points
            )));
        }
        if let Some((lo, hi)) = self.bracket {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!("bad grid bracket [{lo}, {hi}]")));
            }
        }
        if !(self.refine_tolerance > 0.0) {
            return Err(Error::InvalidConfig("refine_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Retained set of a p-value curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub set: IntervalSet,
    /// Disjoint retained pieces found; more than the set can represent when
    /// it exceeds 2 (or 1 without both rays), in which case `set` is the
    /// smallest representable superset.
    pub pieces: usize,
}

/// Inverts `p` over the real line.
///
/// `p_neg_inf` / `p_pos_inf` are the limiting p-values as the parameter
/// goes to -inf / +inf; they decide whether retention at a grid edge is a ray.
pub(crate) fn invert<F>(
    p: F,
    p_neg_inf: f64,
    p_pos_inf: f64,
    alpha: f64,
    grid: &GridSpec,
    bracket: (f64, f64),
) -> Result<Inverted>
where
    F: Fn(f64) -> f64,
{
    grid.validate()?;
    let keep = |v: f64| v >= alpha;
    let (keep_neg, keep_pos) = (keep(p_neg_inf), keep(p_pos_inf));
    let (mut lo, mut hi) = bracket;
    let tol = grid.refine_tolerance * (hi - lo);

    let mut expansions = 0;
    let (xs, kept) = loop {
        let m = grid.coarse_points;
        let xs: Vec<f64> = (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect();
        let kept: Vec<bool> = xs.iter().map(|&x| keep(p(x))).collect();
        let lo_ok = kept[0] == keep_neg;
        let hi_ok = kept[m - 1] == keep_pos;
        if lo_ok && hi_ok {
            break (xs, kept);
        }
        if expansions == grid.max_expansions {
            return Err(Error::GridTooCoarse(format!(
                "retention at the edge of [{lo}, {hi}] disagrees with the limiting p-value \
                 after {expansions} expansions"
            )));
        }
        let w = hi - lo;
        if !lo_ok {
            lo -= w;
        }
        if !hi_ok {
            hi += w;
        }
        expansions += 1;
    };

    let boundary = |mut reject: f64, mut retain: f64| -> Result<f64> {
        for _ in 0..grid.max_refinements {
            if (retain - reject).abs() <= tol {
                return Ok(retain);
            }
            let mid = 0.5 * (reject + retain);
            if keep(p(mid)) {
                retain = mid;
            } else {
                reject = mid;
            }
        }
        if (retain - reject).abs() <= tol {
            Ok(retain)
        } else {
            Err(Error::GridTooCoarse(format!(
                "endpoint bracket [{}, {}] still wider than {tol} after {} bisections",
                reject.min(retain),
                reject.max(retain),
                grid.max_refinements
            )))
        }
    };

    let m = xs.len();
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < m {
        if !kept[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < m && kept[i + 1] {
            i += 1;
        }
        let end = i;
        let left = if start == 0 {
            f64::NEG_INFINITY
        } else {
            boundary(xs[start - 1], xs[start])?
        };
        let right = if end == m - 1 {
            f64::INFINITY
        } else {
            boundary(xs[end + 1], xs[end])?
        };
        runs.push((left, right));
        i += 1;
    }

    Ok(Inverted {
        set: assemble(&runs),
        pieces: runs.len(),
    })
}

/// Piece count worth reporting: set only when `set` had to merge pieces.
pub(crate) fn excess_pieces(inv: &Inverted) -> Option<usize> {
    let representable = match inv.set {
        IntervalSet::TwoRays { .. } => 2,
        _ => 1,
    };
    (inv.pieces > representable).then_some(inv.pieces)
}

/// Smallest representable superset of a sorted list of disjoint runs.
fn assemble(runs: &[(f64, f64)]) -> IntervalSet {
    let (Some(first), Some(last)) = (runs.first(), runs.last()) else {
        return IntervalSet::Empty;
    };
    let (lo, hi) = (first.0, last.1);
    match (lo.is_infinite(), hi.is_infinite()) {
        (true, true) if runs.len() == 1 => IntervalSet::FullLine,
        (true, true) => {
            // keep the widest rejected gap
            let gap = runs
                .windows(2)
                .map(|w| (w[0].1, w[1].0))
                .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
                .expect("at least two runs");
            IntervalSet::two_rays(gap.0, gap.1)
        }
        (true, false) => IntervalSet::LeftRay { hi },
        (false, true) => IntervalSet::RightRay { lo },
        (false, false) => IntervalSet::bounded(lo, hi),
    }
}
