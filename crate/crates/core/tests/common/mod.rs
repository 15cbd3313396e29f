//! Reference implementations shared by the oracle and acceptance suites.

#![allow(dead_code)]

use ivrand::{
    moment_summary, permutation_pvalue, rank_test_pvalue, solve_quadratic_leq, IvDataset,
    PermutationEngine, QuadraticCoefficients,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// All `k`-subsets of `0..n` as membership vectors.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).map(|i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

pub fn split(v: &[f64], z: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let t = v.iter().zip(z).filter(|p| *p.1).map(|p| *p.0).collect();
    let c = v.iter().zip(z).filter(|p| !*p.1).map(|p| *p.0).collect();
    (t, c)
}

pub fn abs_t_over_s(q: &[f64], z: &[bool]) -> f64 {
    let (t, c) = split(q, z);
    let diff = mean(&t) - mean(&c);
    let se = (sample_var(&t) / t.len() as f64 + sample_var(&c) / c.len() as f64).sqrt();
    (diff / se).abs()
}

pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&u| u < x).count() as f64;
            let equal = v.iter().filter(|&&u| u == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub struct Fixture {
    pub y: Vec<f64>,
    pub d: Vec<f64>,
    pub z: Vec<bool>,
    pub tau0: f64,
}

/// Twenty designs with `n <= 10`: continuous outcomes, integer outcomes
/// with ties, one-sided and two-sided noncompliance.
pub fn fixtures() -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|k| {
            let n = 6 + k % 5;
            let n1 = 3 + k % (n - 5);
            let mut z = vec![false; n];
            z[..n1].iter_mut().for_each(|x| *x = true);
            let d: Vec<f64> = (0..n)
                .map(|i| {
                    let complier = rng.random::<f64>() < 0.7;
                    let takes = if z[i] { complier } else { k % 3 == 0 && rng.random::<f64>() < 0.2 };
                    takes as u8 as f64
                })
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let e: f64 = rng.sample(StandardNormal);
                    let v = 1.0 + 1.5 * d[i] + e;
                    if k % 4 == 0 {
                        v.round()
                    } else {
                        v
                    }
                })
                .collect();
            Fixture {
                y,
                d,
                z,
                tau0: [0.0, 1.0, -0.5, 2.5][k % 4],
            }
        })
        .collect()
}

pub fn dataset(f: &Fixture) -> IvDataset {
    IvDataset::from_bools(f.y.clone(), f.d.clone(), f.z.clone()).unwrap()
}

/// Fixtures whose studentized p-value or statistic differs from brute force.
pub fn studentized_mismatches() -> Vec<String> {
    let eng = PermutationEngine::full_enumeration();
    let mut bad = Vec::new();
    for (k, f) in fixtures().iter().enumerate() {
        let q: Vec<f64> = f.y.iter().zip(&f.d).map(|(y, d)| y - d * f.tau0).collect();
        let n1 = f.z.iter().filter(|&&b| b).count();
        let obs = abs_t_over_s(&q, &f.z);
        let all = subsets(q.len(), n1);
        let hits = all
            .iter()
            .filter(|zz| abs_t_over_s(&q, zz) >= obs * (1.0 - 1e-9))
            .count();
        let oracle = hits as f64 / all.len() as f64;
        let got = permutation_pvalue(&dataset(f), f.tau0, &eng).unwrap();
        if got.n_draws != all.len()
            || (got.p_value - oracle).abs() >= 1e-12
            || (got.t_obs - obs).abs() > 1e-9 * obs.max(1.0)
        {
            bad.push(format!("fixture {k}: p {} vs {oracle}, t {} vs {obs}", got.p_value, got.t_obs));
        }
    }
    bad
}

/// Fixtures whose two-sided rank-sum p-value differs from brute force.
pub fn rank_mismatches() -> Vec<String> {
    let eng = PermutationEngine::full_enumeration();
    let mut bad = Vec::new();
    for (k, f) in fixtures().iter().enumerate() {
        let w: Vec<f64> = f.y.iter().zip(&f.d).map(|(y, d)| y - d * f.tau0).collect();
        let r = mid_ranks(&w);
        let n1 = f.z.iter().filter(|&&b| b).count();
        let stat = |zz: &[bool]| -> f64 { r.iter().zip(zz).filter(|p| *p.1).map(|p| *p.0).sum() };
        let obs = stat(&f.z);
        let all = subsets(w.len(), n1);
        let m = all.len() as f64;
        let upper = all.iter().filter(|zz| stat(zz) >= obs - 1e-9).count() as f64 / m;
        let lower = all.iter().filter(|zz| stat(zz) <= obs + 1e-9).count() as f64 / m;
        let oracle = (2.0 * upper.min(lower)).min(1.0);
        let got = rank_test_pvalue(&dataset(f), f.tau0, &eng).unwrap();
        if (got.p_value - oracle).abs() >= 1e-12 {
            bad.push(format!("fixture {k}: {} vs {oracle}", got.p_value));
        }
    }
    bad
}

/// Largest relative error of `moment_summary` against per-arm loops, over
/// `cases` random datasets.
pub fn moment_max_rel_error(cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(4..60);
        let z: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let d: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() < 0.5) as u8 as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| 100.0 + 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let ds = IvDataset::from_bools(y.clone(), d.clone(), z.clone()).unwrap();
        let ms = moment_summary(&ds).unwrap();

        let (y1, y0) = split(&y, &z);
        let (d1, d0) = split(&d, &z);
        let cov_arm = |a: &[f64], b: &[f64]| {
            let (ma, mb) = (mean(a), mean(b));
            let mut s = 0.0;
            for i in 0..a.len() {
                s += (a[i] - ma) * (b[i] - mb);
            }
            s / (a.len() as f64 - 1.0) / a.len() as f64
        };
        let expect = [
            mean(&y1) - mean(&y0),
            mean(&d1) - mean(&d0),
            cov_arm(&y1, &y1) + cov_arm(&y0, &y0),
            cov_arm(&d1, &d1) + cov_arm(&d0, &d0),
            cov_arm(&y1, &d1) + cov_arm(&y0, &d0),
        ];
        let got = [ms.tau_y, ms.tau_d, ms.var_y, ms.var_d, ms.cov];
        for (g, e) in got.iter().zip(expect) {
            // exact zeros (constant treatment in both arms) compare absolutely
            let err = if e == 0.0 { g.abs() } else { (g - e).abs() / e.abs() };
            worst = worst.max(err);
        }
    }
    worst
}

/// Grid points in [-100, 100] (1e5 per triple) where the solved set and
/// the sign of `a x^2 + b x + c` disagree, over `triples` random triples
/// that include exact and near-zero coefficients.
pub fn quadratic_disagreements(triples: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coef = |rng: &mut ChaCha8Rng| -> f64 {
        match rng.random_range(0..6) {
            0 => 0.0,
            1 => rng.random_range(-1e-3..1e-3),
            _ => rng.random_range(-5.0..5.0),
        }
    };
    let mut disagreements = 0;
    for _ in 0..triples {
        let qc = QuadraticCoefficients {
            a: coef(&mut rng),
            b: coef(&mut rng),
            c: coef(&mut rng),
            alpha: 0.05,
            z_crit: 1.96,
        };
        let set = solve_quadratic_leq(&qc);
        let scale = qc.a.abs().max(qc.b.abs()).max(qc.c.abs()).max(1e-300);
        for i in 0..100_000 {
            let x = -100.0 + 200.0 * i as f64 / 99_999.0;
            let f = qc.eval(x);
            // points numerically on a root are ambiguous for any solver
            if f.abs() <= 1e-12 * scale * (1.0 + x * x) {
                continue;
            }
            if set.contains(x) != (f <= 0.0) {
                disagreements += 1;
            }
        }
    }
    disagreements
}
