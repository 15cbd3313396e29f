//! Property-based checks of the algebraic identities and invariants that
//! tie the estimators together.

use ivrand::{
    adjusted_dataset, almost_exact_ci, bloom_variance, c_factor, closed_form_endpoints,
    delta_rewrite_check, delta_variance, exact_ci, gamma_sweep, instrument_t_stat, moment_summary,
    permutation_pvalue, quadratic_coefficients, rank_ci, rank_test_pvalue, residualize, tsls_ci,
    z_critical, GridSpec, IntervalSet, IvDataset, MomentSummary, PermutationEngine,
    SensitivityStatistic,
};
use proptest::prelude::*;

fn summary() -> impl Strategy<Value = MomentSummary> {
    (
        -10.0..10.0f64,
        prop_oneof![-1.0..-0.01f64, 0.01..1.0f64],
        0.001..5.0f64,
        0.0001..0.5f64,
        -1.0..1.0f64,
    )
        .prop_map(|(tau_y, tau_d, var_y, var_d, rho)| MomentSummary {
            tau_y,
            tau_d,
            var_y,
            var_d,
            cov: rho * (var_y * var_d).sqrt(),
        })
}

/// Binary instrument with both arms of size >= 2, binary treatment with
/// optional two-sided noncompliance, and continuous outcomes.
fn dataset(max_n: usize, two_sided: bool) -> impl Strategy<Value = IvDataset> {
    (6..=max_n)
        .prop_flat_map(move |n| {
            (
                Just(n),
                2..=n - 2,
                prop::collection::vec(-3.0..3.0f64, n),
                prop::collection::vec(0.0..1.0f64, n),
                0.05..0.95f64,
                -2.0..4.0f64,
            )
        })
        .prop_map(move |(n, n1, noise, u, pi, effect)| {
            let z: Vec<bool> = (0..n).map(|i| i < n1).collect();
            let d: Vec<f64> = (0..n)
                .map(|i| {
                    let takes = if z[i] { u[i] < pi } else { two_sided && u[i] < 0.1 };
                    takes as u8 as f64
                })
                .collect();
            let y = (0..n).map(|i| effect * d[i] + noise[i]).collect();
            IvDataset::from_bools(y, d, z).unwrap()
        })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn delta_variance_is_bloom_times_c(ms in summary()) {
        let lhs = delta_variance(&ms).unwrap();
        let rhs = bloom_variance(&ms).unwrap() * c_factor(&ms).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn delta_rewrite_holds(ms in summary(), alpha in 0.001..0.5f64) {
        prop_assert!(delta_rewrite_check(&ms, alpha));
    }

    #[test]
    fn c_below_one_iff_sign_condition(ms in summary()) {
        let c = c_factor(&ms).unwrap();
        let tau = ms.tau_y / ms.tau_d;
        // C < 1 exactly when tau^2 var_D < 2 tau cov
        let lhs = tau * tau * ms.var_d;
        let rhs = 2.0 * tau * ms.cov;
        prop_assume!((lhs - rhs).abs() > 1e-9 * (lhs.abs() + rhs.abs() + 1e-12));
        prop_assert_eq!(c < 1.0, lhs < rhs);
    }

    #[test]
    fn finite_almost_exact_endpoints_match_closed_form(ds in dataset(60, true), alpha in 0.01..0.2f64) {
        let r = almost_exact_ci(&ds, alpha).unwrap();
        if let IntervalSet::Bounded { lo, hi } = r.interval {
            let ms = moment_summary(&ds).unwrap();
            let (clo, chi) = closed_form_endpoints(&ms, alpha).unwrap();
            let scale = lo.abs().max(hi.abs()).max(1.0);
            prop_assert!((lo - clo).abs() <= 1e-10 * scale, "{} vs {}", lo, clo);
            prop_assert!((hi - chi).abs() <= 1e-10 * scale, "{} vs {}", hi, chi);
        }
    }

    #[test]
    fn infinite_iff_weak_instrument(ds in dataset(60, true), alpha in 0.01..0.2f64) {
        let ms = moment_summary(&ds).unwrap();
        // undefined when the treatment never varies
        let Ok(t) = instrument_t_stat(&ms) else { return Ok(()) };
        let z = z_critical(alpha);
        prop_assume!((t - z).abs() > 1e-9);
        let r = almost_exact_ci(&ds, alpha).unwrap();
        prop_assert_eq!(r.interval.is_unbounded(), t <= z);
    }

    #[test]
    fn almost_exact_membership_is_the_defining_inequality(ds in dataset(40, true), tau0 in -20.0..20.0f64) {
        let ms = moment_summary(&ds).unwrap();
        let qc = quadratic_coefficients(&ms, 0.05).unwrap();
        let f = qc.eval(tau0);
        let scale = qc.a.abs() * tau0 * tau0 + qc.b.abs() * tau0.abs() + qc.c.abs();
        prop_assume!(f.abs() > 1e-9 * scale);
        let set = almost_exact_ci(&ds, 0.05).unwrap().interval;
        prop_assert_eq!(set.contains(tau0), f <= 0.0);
    }

    #[test]
    fn wald_intervals_are_centred_on_the_ratio(ds in dataset(40, true)) {
        if let Ok(r) = tsls_ci(&ds, 0.05) {
            let IntervalSet::Bounded { lo, hi } = r.interval else { panic!("tsls must be bounded") };
            prop_assert!(close(0.5 * (lo + hi), r.point.unwrap(), 1e-9));
        }
    }

    #[test]
    fn shifting_outcomes_by_c_d_shifts_the_sets(ds in dataset(10, true), c in -3.0..3.0f64) {
        let y: Vec<f64> = ds.y().iter().zip(ds.d()).map(|(y, d)| y + c * d).collect();
        let shifted = ds.with_outcome(y).unwrap();
        let eng = PermutationEngine::full_enumeration();
        for tau0 in [-1.0, 0.5, 2.0] {
            let a = permutation_pvalue(&ds, tau0, &eng).unwrap().p_value;
            let b = permutation_pvalue(&shifted, tau0 + c, &eng).unwrap().p_value;
            prop_assert!((a - b).abs() < 1e-12);
        }
        let (a, b) = (almost_exact_ci(&ds, 0.05).unwrap().interval, almost_exact_ci(&shifted, 0.05).unwrap().interval);
        if let (IntervalSet::Bounded { lo: l1, hi: h1 }, IntervalSet::Bounded { lo: l2, hi: h2 }) = (a, b) {
            prop_assert!(close(l1 + c, l2, 1e-8) && close(h1 + c, h2, 1e-8));
        }
    }

    #[test]
    fn relabelling_units_changes_nothing(ds in dataset(10, true), rot in 1usize..9) {
        let n = ds.n();
        let idx: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let perm = IvDataset::from_bools(
            idx.iter().map(|&i| ds.y()[i]).collect(),
            idx.iter().map(|&i| ds.d()[i]).collect(),
            idx.iter().map(|&i| ds.z()[i]).collect(),
        ).unwrap();
        let eng = PermutationEngine::full_enumeration();
        let a = permutation_pvalue(&ds, 0.7, &eng).unwrap().p_value;
        let b = permutation_pvalue(&perm, 0.7, &eng).unwrap().p_value;
        prop_assert!((a - b).abs() < 1e-12);
        let a = rank_test_pvalue(&ds, 0.7, &eng).unwrap().p_value;
        let b = rank_test_pvalue(&perm, 0.7, &eng).unwrap().p_value;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn permutation_pvalues_are_valid_probabilities(ds in dataset(12, true), tau0 in -5.0..5.0f64) {
        let eng = PermutationEngine::full_enumeration();
        let r = permutation_pvalue(&ds, tau0, &eng).unwrap();
        prop_assert!(r.p_value >= 1.0 / r.n_draws as f64 && r.p_value <= 1.0);
        let q = rank_test_pvalue(&ds, tau0, &eng).unwrap();
        prop_assert!(q.p_value > 0.0 && q.p_value <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_set_agrees_with_pvalues(ds in dataset(12, true)) {
        // resolution is the grid spacing: 2000 cells over [-50, 50]
        let eng = PermutationEngine::full_enumeration();
        let grid = GridSpec { coarse_points: 2001, ..GridSpec::default() }.with_bracket(-50.0, 50.0);
        let r = exact_ci(&ds, 0.1, &eng, &grid).unwrap();
        let spacing = 0.05;
        for i in 0..=400 {
            let tau0 = -49.0 + 98.0 * i as f64 / 400.0;
            let p = permutation_pvalue(&ds, tau0, &eng).unwrap().p_value;
            let near_switch = (-4..=4).any(|k| {
                let q = permutation_pvalue(&ds, tau0 + k as f64 * 0.5 * spacing, &eng).unwrap().p_value;
                (q >= 0.1) != (p >= 0.1)
            });
            if !near_switch && r.diagnostics.disjoint_pieces.is_none() {
                prop_assert_eq!(r.interval.contains(tau0), p >= 0.1, "tau0 = {}", tau0);
            }
        }
    }

    #[test]
    fn one_sided_rank_sets_are_contiguous(ds in dataset(14, false)) {
        let eng = PermutationEngine::full_enumeration();
        let r = rank_ci(&ds, 0.05, &eng, &GridSpec::default()).unwrap();
        let split = matches!(r.interval, IntervalSet::TwoRays { .. });
        prop_assert!(!split);
        prop_assert!(r.diagnostics.disjoint_pieces.is_none());
    }

    #[test]
    fn sensitivity_bounds_bracket_and_widen(ds in dataset(12, true), tau0 in -2.0..2.0f64) {
        let eng = PermutationEngine::full_enumeration();
        let gammas = [1.0, 1.2, 1.5, 2.0, 4.0];
        for stat in [SensitivityStatistic::Studentized, SensitivityStatistic::RankSum] {
            let rows = gamma_sweep(&ds, tau0, &gammas, stat, &eng).unwrap();
            let p1 = match stat {
                SensitivityStatistic::Studentized => permutation_pvalue(&ds, tau0, &eng).unwrap().p_value,
                SensitivityStatistic::RankSum => rank_test_pvalue(&ds, tau0, &eng).unwrap().p_value,
            };
            prop_assert!((rows[0].p_low - p1).abs() < 1e-9 && (rows[0].p_high - p1).abs() < 1e-9);
            for w in rows.windows(2) {
                prop_assert!(w[1].p_high >= w[0].p_high - 1e-12);
                prop_assert!(w[1].p_low <= w[0].p_low + 1e-12);
            }
            for r in &rows {
                prop_assert!(r.p_low <= p1 + 1e-12 && p1 <= r.p_high + 1e-12);
            }
        }
    }

    #[test]
    fn residuals_are_orthogonal_and_idempotent(
        n in 8usize..40,
        seed in prop::collection::vec(-2.0..2.0f64, 120),
    ) {
        let v: Vec<f64> = (0..n).map(|i| seed[i] * 3.0 + 1.0).collect();
        let x1: Vec<f64> = (0..n).map(|i| seed[40 + i]).collect();
        let x2: Vec<f64> = (0..n).map(|i| seed[80 + i] + 0.3 * seed[40 + i]).collect();
        let cols = vec![x1.clone(), x2.clone()];
        let r = residualize(&v, &cols).unwrap();
        let scale: f64 = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        for col in [vec![1.0; n], x1, x2] {
            let dot: f64 = r.iter().zip(&col).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-9 * scale * n as f64);
        }
        let again = residualize(&r, &cols).unwrap();
        for (a, b) in r.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn covariate_adjustment_keeps_design(ds in dataset(30, true), cov in prop::collection::vec(-1.0..1.0f64, 30)) {
        let x = cov[..ds.n()].to_vec();
        prop_assume!(x.iter().any(|&v| (v - x[0]).abs() > 1e-3));
        let adj = adjusted_dataset(&ds, &[x]).unwrap();
        prop_assert_eq!(adj.z(), ds.z());
        prop_assert_eq!(adj.d(), ds.d());
        prop_assert!(adj.y().iter().sum::<f64>().abs() < 1e-9);
    }
}
