//! The almost-exact interval: the normal approximation to the studentized
//! permutation test, inverted in closed form.
//!
//! `|tau_Y - tau0 tau_D| <= z sqrt(var(Q(tau0)))` squares into
//! `a tau0^2 + b tau0 + c <= 0`, whose solution set may be bounded, empty,
//! a pair of rays or the whole line.

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Result};
use crate::estimators::{instrument_t_stat, moment_summary, wald_estimate};
use crate::model::{Diagnostics, InferenceResult, IntervalSet, IvDataset, Method, MomentSummary};
use crate::normal::z_critical;

/// Discriminants this close to zero, relative to `max(b^2, |4ac|)`, are zero.
const DISC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub z_crit: f64,
}

impl QuadraticCoefficients {
    /// Raw discriminant `b^2 - 4ac`.
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

pub fn quadratic_coefficients(ms: &MomentSummary, alpha: f64) -> Result<QuadraticCoefficients> {
    check_alpha(alpha)?;
    let z = z_critical(alpha);
    let z2 = z * z;
    Ok(QuadraticCoefficients {
        a: ms.tau_d * ms.tau_d - z2 * ms.var_d,
        b: -2.0 * (ms.tau_d * ms.tau_y - z2 * ms.cov),
        c: ms.tau_y * ms.tau_y - z2 * ms.var_y,
        alpha,
        z_crit: z,
    })
}

/// `{x : a x^2 + b x + c <= 0}`.
pub fn solve_quadratic_leq(qc: &QuadraticCoefficients) -> IntervalSet {
    let (a, b, c) = (qc.a, qc.b, qc.c);
    if a == 0.0 {
        return if b > 0.0 {
            IntervalSet::LeftRay { hi: -c / b }
        } else if b < 0.0 {
            IntervalSet::RightRay { lo: -c / b }
        } else if c <= 0.0 {
            IntervalSet::FullLine
        } else {
            IntervalSet::Empty
        };
    }

    let raw = qc.discriminant();
    let zero_band = DISC_TOLERANCE * (b * b).max((4.0 * a * c).abs());
    let disc = if raw.abs() <= zero_band { 0.0 } else { raw };

    if disc < 0.0 {
        return if a > 0.0 {
            IntervalSet::Empty
        } else {
            IntervalSet::FullLine
        };
    }
    if disc == 0.0 {
        return if a > 0.0 {
            IntervalSet::Point(-b / (2.0 * a))
        } else {
            IntervalSet::FullLine
        };
    }

    let (r1, r2) = stable_roots(a, b, c, disc);
    let (lo, hi) = (r1.min(r2), r1.max(r2));
    if a > 0.0 {
        IntervalSet::bounded(lo, hi)
    } else {
        IntervalSet::two_rays(lo, hi)
    }
}

/// Roots without cancellation: `q = -(b + sign(b) sqrt(disc)) / 2`,
/// roots `q / a` and `c / q`.
fn stable_roots(a: f64, b: f64, c: f64, disc: f64) -> (f64, f64) {
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + sign * disc.sqrt());
    if q == 0.0 {
        // b = 0 and disc = 0 cannot reach here; b = 0 and c = 0 gives q = 0
        return (0.0, 0.0);
    }
    (q / a, c / q)
}

/// `tau_Y^2 var_D + tau_D^2 var_Y - 2 tau_D tau_Y cov`, the numerator of
/// the delta-method variance of the Wald ratio (times `tau_D^4`).
pub fn delta_hat(ms: &MomentSummary) -> f64 {
    ms.tau_y * ms.tau_y * ms.var_d + ms.tau_d * ms.tau_d * ms.var_y
        - 2.0 * ms.tau_d * ms.tau_y * ms.cov
}

/// Centre and half-width of the bounded interval written out explicitly.
/// Only meaningful when `a > 0` and the discriminant is positive.
pub fn closed_form_endpoints(ms: &MomentSummary, alpha: f64) -> Result<(f64, f64)> {
    let qc = quadratic_coefficients(ms, alpha)?;
    let z2 = qc.z_crit * qc.z_crit;
    let centre = (ms.tau_d * ms.tau_y - z2 * ms.cov) / qc.a;
    let spread = qc.z_crit * (delta_hat(ms) + z2 * (ms.cov * ms.cov - ms.var_d * ms.var_y)).sqrt()
        / qc.a;
    Ok((centre - spread, centre + spread))
}

pub fn almost_exact_ci(ds: &IvDataset, alpha: f64) -> Result<InferenceResult> {
    let ms = moment_summary(ds)?;
    let qc = quadratic_coefficients(&ms, alpha)?;
    Ok(InferenceResult {
        method: Method::AlmostExact,
        point: wald_estimate(ds).ok(),
        interval: solve_quadratic_leq(&qc),
        alpha,
        diagnostics: Diagnostics {
            instrument_t: instrument_t_stat(&ms).unwrap_or(0.0),
            abc: Some((qc.a, qc.b, qc.c)),
            delta_hat: Some(delta_hat(&ms)),
            ..Diagnostics::default()
        },
    })
}

/// Plug-in first-stage variance used to predict when intervals go infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceModel {
    /// One-sided noncompliance, `var(tau_D) = tau_D (1 - tau_D) / n`.
    OneSidedCompliance,
}

/// First-stage effect at or below which `a <= 0`, i.e. the almost-exact
/// interval is infinite: `z^2 / (n + z^2)`.
pub fn compliance_threshold(n: usize, alpha: f64, model: VarianceModel) -> Result<f64> {
    check_alpha(alpha)?;
    let z = z_critical(alpha);
    match model {
        VarianceModel::OneSidedCompliance => Ok(z * z / (n as f64 + z * z)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qc(a: f64, b: f64, c: f64) -> QuadraticCoefficients {
        QuadraticCoefficients {
            a,
            b,
            c,
            alpha: 0.05,
            z_crit: 1.96,
        }
    }

    #[test]
    fn coefficient_examples() {
        let ms = MomentSummary {
            tau_y: 2.0,
            tau_d: 1.0,
            var_y: 1.0,
            var_d: 1.0,
            cov: 0.0,
        };
        // alpha giving z = 2 exactly is not representable; check the algebra at z
        let q = quadratic_coefficients(&ms, 0.05).unwrap();
        let z2 = q.z_crit * q.z_crit;
        assert_eq!((q.a, q.b, q.c), (1.0 - z2, -4.0, 4.0 - z2));

        let point = MomentSummary {
            tau_y: 3.0,
            tau_d: 0.5,
            var_y: 0.0,
            var_d: 0.0,
            cov: 0.0,
        };
        let q = quadratic_coefficients(&point, 0.05).unwrap();
        assert_eq!((q.a, q.b, q.c), (0.25, -3.0, 9.0));
        assert_eq!(solve_quadratic_leq(&q), IntervalSet::Point(6.0));
    }

    #[test]
    fn case_analysis() {
        assert_eq!(solve_quadratic_leq(&qc(1.0, 0.0, -1.0)), IntervalSet::bounded(-1.0, 1.0));
        assert_eq!(
            solve_quadratic_leq(&qc(-1.0, 0.0, 1.0)),
            IntervalSet::TwoRays {
                hi_left: -1.0,
                lo_right: 1.0
            }
        );
        assert_eq!(solve_quadratic_leq(&qc(-1.0, 0.0, -1.0)), IntervalSet::FullLine);
        assert_eq!(solve_quadratic_leq(&qc(1.0, 0.0, 1.0)), IntervalSet::Empty);
        assert_eq!(solve_quadratic_leq(&qc(0.0, 2.0, -4.0)), IntervalSet::LeftRay { hi: 2.0 });
        assert_eq!(solve_quadratic_leq(&qc(0.0, -2.0, -4.0)), IntervalSet::RightRay { lo: -2.0 });
        assert_eq!(solve_quadratic_leq(&qc(0.0, 0.0, 0.0)), IntervalSet::FullLine);
        assert_eq!(solve_quadratic_leq(&qc(0.0, 0.0, 1.0)), IntervalSet::Empty);
        assert_eq!(solve_quadratic_leq(&qc(-1.0, 2.0, -1.0)), IntervalSet::FullLine);
    }

    #[test]
    fn stable_roots_for_lopsided_coefficients() {
        let s = solve_quadratic_leq(&qc(1.0, -1e8, 1.0));
        match s {
            IntervalSet::Bounded { lo, hi } => {
                assert!((lo - 1e-8).abs() / 1e-8 < 1e-12);
                assert!((hi - 1e8).abs() / 1e8 < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_form_agrees_with_roots() {
        let ms = MomentSummary {
            tau_y: 0.8,
            tau_d: 0.6,
            var_y: 0.09,
            var_d: 0.01,
            cov: 0.012,
        };
        let (lo, hi) = closed_form_endpoints(&ms, 0.05).unwrap();
        let s = solve_quadratic_leq(&quadratic_coefficients(&ms, 0.05).unwrap());
        let IntervalSet::Bounded { lo: l, hi: h } = s else {
            panic!("{s:?}")
        };
        assert!((lo - l).abs() <= 1e-10 * l.abs());
        assert!((hi - h).abs() <= 1e-10 * h.abs());
    }

    #[test]
    fn thresholds() {
        let t = compliance_threshold(100, 0.05, VarianceModel::OneSidedCompliance).unwrap();
        assert!((t - 0.036_995).abs() < 1e-5);
        let t = compliance_threshold(200, 0.05, VarianceModel::OneSidedCompliance).unwrap();
        assert!((t - 0.018_846).abs() < 1e-5);
    }

    #[test]
    fn dataset_interval_carries_diagnostics() {
        let ds = IvDataset::new(
            vec![3.0, 2.5, 1.0, 0.8, 2.9, 1.1],
            vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0],
            &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        let r = almost_exact_ci(&ds, 0.05).unwrap();
        assert_eq!(r.method, Method::AlmostExact);
        assert!(r.diagnostics.abc.is_some());
        assert!(matches!(r.interval, IntervalSet::Bounded { .. }));
    }
}
