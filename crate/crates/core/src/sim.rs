//! Monte Carlo harness for one-sided noncompliance designs: coverage,
//! median length, infinite-interval frequency and point-estimate bias per
//! method and compliance rate, plus a sweep of the almost-exact quadratic
//! coefficients across compliance rates.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::almost_exact::{almost_exact_ci, quadratic_coefficients};
use crate::asymptotic::{bloom_ci, tsls_ci};
use crate::error::{check_alpha, Error, Result};
use crate::estimators::moment_summary;
use crate::exact::exact_ci;
use crate::inversion::GridSpec;
use crate::model::{InferenceResult, IvDataset, Method};
use crate::permutation::{splitmix64, stream_rng, PermutationEngine};
use crate::rank::rank_ci;

/// How the configured `n` maps to a sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NInterpretation {
    /// `n` units in total, each assigned with probability 1/2.
    Total,
    /// `n` units expected per arm (`2n` in total).
    PerArm,
}

/// What to do with replicates in which no treated unit complies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroFirstStage {
    /// Keep them; Wald-based methods fail there and count as misses.
    Keep,
    /// Draw a fresh replicate and count the redraw.
    Redraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub compliance_rates: Vec<f64>,
    /// Outcome mean without treatment.
    pub kappa: f64,
    /// Effect of treatment received on the outcome mean (the true `tau`).
    pub gamma: f64,
    pub sigma2: f64,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub n_interpretation: NInterpretation,
    pub zero_first_stage: ZeroFirstStage,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 100,
            compliance_rates: vec![0.019, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90],
            kappa: 1.0,
            gamma: 1.0,
            sigma2: 1.0,
            replications: 5000,
            alpha: 0.05,
            seed: 20_240_601,
            methods: vec![Method::AlmostExact, Method::Bloom, Method::TslsDelta],
            n_interpretation: NInterpretation::Total,
            zero_first_stage: ZeroFirstStage::Keep,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.replications < 100 {
            return bad(format!("replications must be >= 100, got {}", self.replications));
        }
        if let Some(p) = self.compliance_rates.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("compliance rate {p} is not in (0, 1)"));
        }
        if self.n < 4 {
            return bad(format!("n must be >= 4, got {}", self.n));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !self.kappa.is_finite() || !self.gamma.is_finite() {
            return bad("kappa and gamma must be finite".into());
        }
        check_alpha(self.alpha)
    }

    /// Number of units drawn per replicate.
    pub fn total_units(&self) -> usize {
        match self.n_interpretation {
            NInterpretation::Total => self.n,
            NInterpretation::PerArm => 2 * self.n,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys are the field
    /// names; lists are comma separated. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        match key {
            "n" => self.n = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "sigma2" => self.sigma2 = num(key, value)?,
            "replications" => self.replications = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "compliance_rates" => {
                self.compliance_rates = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(|v| Method::parse(v.trim()).ok_or_else(|| format!("unknown method `{}`", v.trim())))
                    .collect::<std::result::Result<_, _>>()?
            }
            "n_interpretation" => {
                self.n_interpretation = match value {
                    "total" => NInterpretation::Total,
                    "per_arm" => NInterpretation::PerArm,
                    _ => return Err(format!("n_interpretation must be total or per_arm, got `{value}`")),
                }
            }
            "zero_first_stage" => {
                self.zero_first_stage = match value {
                    "keep" => ZeroFirstStage::Keep,
                    "redraw" => ZeroFirstStage::Redraw,
                    _ => return Err(format!("zero_first_stage must be keep or redraw, got `{value}`")),
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

/// A generated dataset and how many draws were discarded to get it.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub data: IvDataset,
    pub redraws: usize,
}

/// One-sided noncompliance: `Z ~ Bernoulli(1/2)`, each unit a complier with
/// probability `pi`, `D = Z * complier`, `Y ~ N(kappa + gamma D, sigma2)`.
///
/// Draws with fewer than two units in an arm are discarded, as are draws
/// with no treated complier under [`ZeroFirstStage::Redraw`].
pub fn generate_onesided(cfg: &SimulationConfig, pi: f64, rep_seed: u64) -> Result<Replicate> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidConfig(format!("compliance rate {pi} is not in (0, 1)")));
    }
    let n = cfg.total_units();
    let noise = Normal::new(0.0, cfg.sigma2.sqrt())
        .map_err(|e| Error::InvalidConfig(format!("bad sigma2: {e}")))?;
    let mut redraws = 0;
    for attempt in 0u64.. {
        let mut rng = stream_rng(rep_seed, 0x5151, attempt);
        let mut z = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let zi = rng.random::<f64>() < 0.5;
            let complier = rng.random::<f64>() < pi;
            let di = if zi && complier { 1.0 } else { 0.0 };
            z.push(zi);
            d.push(di);
            y.push(cfg.kappa + cfg.gamma * di + noise.sample(&mut rng));
        }
        let n1 = z.iter().filter(|&&t| t).count();
        let thin_arm = n1 < 2 || n - n1 < 2;
        let no_first_stage = !d.iter().any(|&v| v > 0.0);
        if thin_arm || (no_first_stage && cfg.zero_first_stage == ZeroFirstStage::Redraw) {
            redraws += 1;
            continue;
        }
        return Ok(Replicate {
            data: IvDataset::from_bools(y, d, z)?,
            redraws,
        });
    }
    unreachable!("the attempt counter is unbounded")
}

/// Anything that turns a dataset into a confidence set can join a study.
pub trait IntervalProcedure: Sync {
    fn name(&self) -> String;
    /// `seed` is unique per replicate, for procedures that randomize.
    fn interval(&self, ds: &IvDataset, alpha: f64, seed: u64) -> Result<InferenceResult>;
}

impl IntervalProcedure for Method {
    fn name(&self) -> String {
        self.as_str().to_string()
    }

    fn interval(&self, ds: &IvDataset, alpha: f64, seed: u64) -> Result<InferenceResult> {
        match self {
            Method::AlmostExact => almost_exact_ci(ds, alpha),
            Method::Bloom => bloom_ci(ds, alpha),
            Method::TslsDelta => tsls_ci(ds, alpha),
            Method::Exact => exact_ci(ds, alpha, &PermutationEngine::auto(seed), &GridSpec::default()),
            Method::Rank => rank_ci(ds, alpha, &PermutationEngine::auto(seed), &GridSpec::default()),
        }
    }
}

/// Aggregates for one method at one compliance rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub method: String,
    pub compliance: f64,
    pub replications: usize,
    pub coverage: f64,
    /// `sqrt(coverage (1 - coverage) / replications)`.
    pub coverage_se: f64,
    /// Median over replicates that produced a set; infinite when at least
    /// half the sets are unbounded.
    pub median_length: f64,
    pub infinite_fraction: f64,
    pub empty_fraction: f64,
    /// Replicates where the method produced no set (counted as misses).
    pub failures: usize,
    /// `mean(point) / truth - 1` over replicates with a point estimate.
    pub mean_relative_bias: f64,
    pub median_relative_bias: f64,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub config: SimulationConfig,
    pub truth: f64,
    pub cells: Vec<CoverageCell>,
}

impl CoverageTable {
    pub fn cell(&self, method: &str, compliance: f64) -> Option<&CoverageCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && (c.compliance - compliance).abs() < 1e-12)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,compliance,replications,coverage,coverage_se,median_length,\
             infinite_fraction,empty_fraction,failures,mean_relative_bias,\
             median_relative_bias,redraws\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{:.6},{:.6},{},{:.6},{:.6},{}",
                c.method,
                c.compliance,
                c.replications,
                c.coverage,
                c.coverage_se,
                fmt_extended(c.median_length),
                c.infinite_fraction,
                c.empty_fraction,
                c.failures,
                c.mean_relative_bias,
                c.median_relative_bias,
                c.redraws
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("table serializes");
        // JSON has no infinity; encode as in interval endpoints
        if let Some(cells) = v.get_mut("cells").and_then(|c| c.as_array_mut()) {
            for (cell, c) in cells.iter_mut().zip(&self.cells) {
                cell["median_length"] = if c.median_length.is_finite() {
                    serde_json::json!(c.median_length)
                } else {
                    serde_json::json!(fmt_extended(c.median_length))
                };
            }
        }
        serde_json::to_string_pretty(&v).expect("table serializes")
    }

    /// Fixed-width text rendering, one row per method.
    pub fn to_text(&self) -> String {
        let rates: Vec<f64> = self.config.compliance_rates.clone();
        let mut methods: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method.as_str()) {
                methods.push(&c.method);
            }
        }
        let mut out = String::new();
        let header = |out: &mut String, title: &str| {
            let _ = write!(out, "{title:<14}");
            for r in &rates {
                let _ = write!(out, "{:>10}", format!("{:.1}%", r * 100.0));
            }
            out.push('\n');
        };
        let sections: [(&str, fn(&CoverageCell) -> String); 4] = [
            ("coverage", |c| format!("{:.3}", c.coverage)),
            ("median length", |c| fmt_extended_prec(c.median_length, 3)),
            ("infinite", |c| format!("{:.3}", c.infinite_fraction)),
            ("rel. bias", |c| format!("{:+.3}", c.mean_relative_bias)),
        ];
        for (title, f) in sections {
            header(&mut out, title);
            for m in &methods {
                let _ = write!(out, "{m:<14}");
                for r in &rates {
                    let s = self.cell(m, *r).map(f).unwrap_or_else(|| "-".into());
                    let _ = write!(out, "{s:>10}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn fmt_extended(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_extended_prec(x: f64, p: usize) -> String {
    if x.is_finite() {
        format!("{x:.p$}")
    } else {
        fmt_extended(x)
    }
}

/// Median of values that may include `+inf`.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        let (a, b) = (values[m / 2 - 1], values[m / 2]);
        if b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

/// Per-replicate seed for compliance rate index `k` and replicate `r`.
fn replicate_seed(seed: u64, k: usize, r: usize) -> u64 {
    splitmix64(splitmix64(seed ^ 0xC0FF_EE00_u64.wrapping_mul(k as u64 + 1)) ^ r as u64)
}

struct Outcome {
    set: Option<(bool, f64, bool, bool)>,
    point: Option<f64>,
}

/// Runs the configured built-in methods.
pub fn coverage_experiment(cfg: &SimulationConfig) -> Result<CoverageTable> {
    let procs: Vec<&dyn IntervalProcedure> =
        cfg.methods.iter().map(|m| m as &dyn IntervalProcedure).collect();
    coverage_experiment_with(cfg, &procs)
}

/// Runs arbitrary procedures. Replicates are generated once per
/// compliance rate and shared by every procedure.
pub fn coverage_experiment_with(
    cfg: &SimulationConfig,
    procs: &[&dyn IntervalProcedure],
) -> Result<CoverageTable> {
    cfg.validate()?;
    let truth = cfg.gamma;
    let mut cells = Vec::new();
    for (k, &pi) in cfg.compliance_rates.iter().enumerate() {
        let reps: Vec<(usize, Vec<Outcome>)> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let seed = replicate_seed(cfg.seed, k, r);
                let rep = generate_onesided(cfg, pi, seed)?;
                let outcomes = procs
                    .iter()
                    .map(|p| match p.interval(&rep.data, cfg.alpha, seed) {
                        Ok(res) => Outcome {
                            set: Some((
                                res.interval.contains(truth),
                                res.interval.length(),
                                res.interval.is_unbounded(),
                                res.interval.is_empty(),
                            )),
                            point: res.point,
                        },
                        Err(_) => Outcome {
                            set: None,
                            point: None,
                        },
                    })
                    .collect();
                Ok((rep.redraws, outcomes))
            })
            .collect::<Result<_>>()?;
        let redraws: usize = reps.iter().map(|r| r.0).sum();
        let total = cfg.replications as f64;
        for (j, p) in procs.iter().enumerate() {
            let sets: Vec<(bool, f64, bool, bool)> = reps.iter().filter_map(|r| r.1[j].set).collect();
            let covered = sets.iter().filter(|s| s.0).count() as f64 / total;
            let mut lengths: Vec<f64> = sets.iter().map(|s| s.1).collect();
            let mut points: Vec<f64> = reps.iter().filter_map(|r| r.1[j].point).collect();
            let mean_point = points.iter().sum::<f64>() / points.len() as f64;
            cells.push(CoverageCell {
                method: p.name(),
                compliance: pi,
                replications: cfg.replications,
                coverage: covered,
                coverage_se: (covered * (1.0 - covered) / total).sqrt(),
                median_length: median(&mut lengths),
                infinite_fraction: sets.iter().filter(|s| s.2).count() as f64 / total,
                empty_fraction: sets.iter().filter(|s| s.3).count() as f64 / total,
                failures: cfg.replications - sets.len(),
                mean_relative_bias: mean_point / truth - 1.0,
                median_relative_bias: median(&mut points) / truth - 1.0,
                redraws,
            });
        }
    }
    Ok(CoverageTable {
        config: cfg.clone(),
        truth,
        cells,
    })
}

/// Mean almost-exact coefficients at one compliance rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pi: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_c: f64,
    pub mean_disc: f64,
}

/// Averages `a`, `b`, `c` and `b^2 - 4ac` over `reps_per_pi` replicates at
/// each compliance rate `pi_lo, pi_lo + step, ..., pi_hi`.
pub fn correction_sweep(
    cfg: &SimulationConfig,
    pi_lo: f64,
    pi_hi: f64,
    step: f64,
    reps_per_pi: usize,
) -> Result<Vec<SweepRow>> {
    if !(0.0 < pi_lo && pi_lo < pi_hi && pi_hi < 1.0) || !(step > 0.0) || reps_per_pi == 0 {
        return Err(Error::InvalidConfig(format!(
            "sweep needs 0 < pi_lo < pi_hi < 1, step > 0 and replicates: {pi_lo}, {pi_hi}, {step}, {reps_per_pi}"
        )));
    }
    check_alpha(cfg.alpha)?;
    let count = ((pi_hi - pi_lo) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            let pi = pi_lo + i as f64 * step;
            let sums = (0..reps_per_pi)
                .into_par_iter()
                .map(|r| {
                    let seed = replicate_seed(cfg.seed ^ 0x5EED_5EED, i, r);
                    let rep = generate_onesided(cfg, pi, seed)?;
                    let qc = quadratic_coefficients(&moment_summary(&rep.data)?, cfg.alpha)?;
                    Ok([qc.a, qc.b, qc.c, qc.discriminant()])
                })
                .collect::<Result<Vec<[f64; 4]>>>()?
                .into_iter()
                .fold([0.0; 4], |mut acc, v| {
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a += x;
                    }
                    acc
                });
            let k = reps_per_pi as f64;
            Ok(SweepRow {
                pi,
                mean_a: sums[0] / k,
                mean_b: sums[1] / k,
                mean_c: sums[2] / k,
                mean_disc: sums[3] / k,
            })
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("pi,mean_a,mean_b,mean_c,mean_disc\n");
    for r in rows {
        let _ = writeln!(out, "{:.4},{:.8},{:.8},{:.8},{:.8}", r.pi, r.mean_a, r.mean_b, r.mean_c, r.mean_disc);
    }
    out
}

/// First `x` after which the centred moving average (over `window`
/// points) of `values` stays above zero for good.
pub fn sustained_zero_crossing(xs: &[f64], values: &[f64], window: usize) -> Option<f64> {
    let n = values.len().min(xs.len());
    let half = window / 2;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(half), (i + half + 1).min(n));
            values[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect();
    let last_non_positive = smooth.iter().rposition(|&v| v <= 0.0);
    match last_non_positive {
        None => xs.first().copied(),
        Some(i) if i + 1 < n => Some(xs[i + 1]),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimulationConfig {
        SimulationConfig {
            replications: 200,
            compliance_rates: vec![0.5],
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn generator_respects_the_design() {
        let cfg = small();
        for s in 0..20 {
            let rep = generate_onesided(&cfg, 0.3, s).unwrap();
            let ds = rep.data;
            assert_eq!(ds.n(), 100);
            for i in 0..ds.n() {
                if !ds.z()[i] {
                    assert_eq!(ds.d()[i], 0.0);
                }
            }
        }
        let perfect = generate_onesided(&cfg, 1.0 - 1e-12, 3).unwrap().data;
        for i in 0..perfect.n() {
            assert_eq!(perfect.d()[i], perfect.z()[i] as u8 as f64);
        }
        let per_arm = SimulationConfig {
            n_interpretation: NInterpretation::PerArm,
            ..cfg
        };
        assert_eq!(generate_onesided(&per_arm, 0.3, 1).unwrap().data.n(), 200);
    }

    #[test]
    fn redraw_policy_removes_zero_first_stage() {
        let cfg = SimulationConfig {
            n: 20,
            zero_first_stage: ZeroFirstStage::Redraw,
            ..small()
        };
        let mut redraws = 0;
        for s in 0..50 {
            let rep = generate_onesided(&cfg, 0.02, s).unwrap();
            assert!(rep.data.d().iter().any(|&v| v > 0.0));
            redraws += rep.redraws;
        }
        assert!(redraws > 0);
    }

    #[test]
    fn coverage_table_is_deterministic() {
        let cfg = small();
        let a = coverage_experiment(&cfg).unwrap();
        let b = coverage_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.cells.len(), 3);
        let ae = a.cell("almost_exact", 0.5).unwrap();
        assert!(ae.coverage > 0.85 && ae.coverage <= 1.0);
        assert!(a.to_json().contains("\"median_length\""));
    }

    #[test]
    fn config_parsing() {
        let cfg = SimulationConfig::parse(
            "# study\nn = 50\ncompliance_rates = 0.1, 0.2\nreplications = 300\nmethods = ae, tsls\n\
             n_interpretation = per_arm\nzero_first_stage = redraw\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 50);
        assert_eq!(cfg.compliance_rates, vec![0.1, 0.2]);
        assert_eq!(cfg.methods, vec![Method::AlmostExact, Method::TslsDelta]);
        assert_eq!(cfg.n_interpretation, NInterpretation::PerArm);
        assert!(SimulationConfig::parse("replications = 10").is_err());
        assert!(SimulationConfig::parse("bogus = 1").is_err());
        assert!(SimulationConfig::parse("compliance_rates = 1.5").is_err());
    }

    #[test]
    fn medians_with_infinity() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [1.0, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&mut [1.0, 2.0, f64::INFINITY, f64::INFINITY, 0.5]), 2.0);
    }

    #[test]
    fn crossing_detection() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let v = [-3.0, -2.0, -1.0, 0.5, -0.1, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sustained_zero_crossing(&xs, &v, 1), Some(5.0));
        assert_eq!(sustained_zero_crossing(&xs, &[-1.0; 10], 3), None);
    }
}
