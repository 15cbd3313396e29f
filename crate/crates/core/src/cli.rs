//! Command-line front end: `analyze`, `simulate` and `sensitivity`.
//!
//! Each command renders into a [`CliOutput`] instead of printing, so the
//! binary stays a thin shell and the commands are testable in-process.
//! Exit codes: 0 success (empty or infinite intervals included), 2 invalid
//! input or configuration, 3 unknown column.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::almost_exact::{almost_exact_ci, compliance_threshold, VarianceModel};
use crate::asymptotic::{bloom_ci, tsls_ci};
use crate::covariates::adjusted_dataset;
use crate::error::Error;
use crate::estimators::diff_in_means;
use crate::exact::{exact_ci, permutation_pvalue};
use crate::inversion::GridSpec;
use crate::model::{InferenceResult, IntervalSet, IvDataset, Method};
use crate::normal::z_critical;
use crate::permutation::{
    binomial, PermutationEngine, PermutationMode, DEFAULT_DRAWS, DEFAULT_ENUMERATION_CAP, MIN_DRAWS,
};
use crate::rank::{rank_ci, rank_test_pvalue};
use crate::sensitivity::{gamma_sweep, sensitivity_value, SensitivityStatistic};
use crate::sim::{
    correction_sweep, coverage_experiment, sustained_zero_crossing, sweep_to_csv, SimulationConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNKNOWN_COLUMN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ivrand", version, about = "Randomization inference for instrumental variables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Confidence intervals for the complier effect from a CSV file.
    Analyze(AnalyzeArgs),
    /// Monte Carlo coverage study and coefficient sweep.
    Simulate(SimulateArgs),
    /// p-value bounds under biased instrument assignment.
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Statistic {
    Studentized,
    RankSum,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub outcome: String,
    #[arg(long, default_value = "d")]
    pub treatment: String,
    #[arg(long, default_value = "z")]
    pub instrument: String,
    /// Covariate columns to residualize the outcome on, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo draws when enumeration is too large.
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    pub draws: usize,
    /// Largest number of assignments to enumerate.
    #[arg(long = "enum-cap", default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub enum_cap: u64,
}

impl EngineArgs {
    fn engine(&self) -> Result<PermutationEngine, Error> {
        if self.draws < MIN_DRAWS {
            return Err(Error::TooFewDraws(self.draws));
        }
        Ok(PermutationEngine {
            mode: PermutationMode::Auto {
                draws: self.draws,
                seed: self.seed,
            },
            enumeration_cap: self.enum_cap,
        })
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Methods to run, comma separated (default: almost_exact, tsls, bloom,
    /// rank, and exact when enumeration fits under the cap).
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Run the exact method even when it needs Monte Carlo.
    #[arg(long)]
    pub exact: bool,
    /// Effect tested for the reported permutation p-values.
    #[arg(long = "null", default_value_t = 0.0, allow_hyphen_values = true)]
    pub null: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Compliance rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    /// Also run the coefficient sweep over compliance rates.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 0.01)]
    pub sweep_lo: f64,
    #[arg(long, default_value_t = 0.10)]
    pub sweep_hi: f64,
    #[arg(long, default_value_t = 0.001)]
    pub sweep_step: f64,
    #[arg(long, default_value_t = 1000)]
    pub sweep_reps: usize,
    /// Directory for coverage.csv, coverage.json and sweep.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Hypothesised effect.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tau0: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.5, 2.0, 3.0])]
    pub gammas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Statistic::Studentized)]
    pub statistic: Statistic,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

/// What a command wants printed, and its exit code.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutput {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, msg: impl Into<String>) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }
}

pub fn run(cli: Cli) -> CliOutput {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Sensitivity(a) => cmd_sensitivity(&a),
    }
}

enum LoadError {
    Invalid(String),
    UnknownColumn(String),
}

impl From<LoadError> for CliOutput {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Invalid(m) => CliOutput::fail(EXIT_INVALID, m),
            LoadError::UnknownColumn(m) => CliOutput::fail(EXIT_UNKNOWN_COLUMN, m),
        }
    }
}

/// Reads the named columns; covariate adjustment is applied when requested.
fn load(args: &DataArgs) -> Result<IvDataset, LoadError> {
    let invalid = |m: String| LoadError::Invalid(m);
    let mut reader = csv::Reader::from_path(&args.data)
        .map_err(|e| invalid(format!("cannot read {}: {e}", args.data.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| invalid(format!("bad header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LoadError::UnknownColumn(format!("no column named `{name}`")))
    };
    let (iy, id, iz) = (find(&args.outcome)?, find(&args.treatment)?, find(&args.instrument)?);
    let icov = args
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;

    let (mut y, mut d, mut z) = (Vec::new(), Vec::new(), Vec::new());
    let mut cov = vec![Vec::new(); icov.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| invalid(format!("row {}: {e}", row + 1)))?;
        let cell = |i: usize, name: &str| -> Result<f64, LoadError> {
            let s = rec.get(i).unwrap_or("").trim();
            if s.is_empty() {
                return Err(invalid(format!("row {}: empty `{name}`", row + 1)));
            }
            s.parse()
                .map_err(|_| invalid(format!("row {}: `{s}` in `{name}` is not a number", row + 1)))
        };
        y.push(cell(iy, &args.outcome)?);
        d.push(cell(id, &args.treatment)?);
        z.push(cell(iz, &args.instrument)?);
        for (k, &i) in icov.iter().enumerate() {
            cov[k].push(cell(i, &args.covariates[k])?);
        }
    }
    let ds = IvDataset::new(y, d, &z).map_err(|e| invalid(e.to_string()))?;
    if cov.is_empty() {
        Ok(ds)
    } else {
        adjusted_dataset(&ds, &cov).map_err(|e| invalid(format!("covariate adjustment: {e}")))
    }
}

struct MethodReport {
    method: Method,
    result: Result<InferenceResult, Error>,
    p_value: Option<f64>,
    runtime_ms: f64,
}

fn interval_json(s: &IntervalSet) -> Value {
    serde_json::to_value(s).expect("interval serializes")
}

fn number_or_null(x: Option<f64>) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        Some(v) if v > 0.0 => json!("inf"),
        Some(v) if v < 0.0 => json!("-inf"),
        _ => Value::Null,
    }
}

fn report_json(r: &MethodReport) -> Value {
    match &r.result {
        Ok(res) => {
            let abc = res.diagnostics.abc;
            json!({
                "method": res.method.as_str(),
                "point": number_or_null(res.point),
                "interval": interval_json(&res.interval),
                "alpha": res.alpha,
                "p_value": number_or_null(r.p_value),
                "diagnostics": {
                    "t_stat": number_or_null(Some(res.diagnostics.instrument_t)),
                    "c_factor": number_or_null(res.diagnostics.c_factor),
                    "a": number_or_null(abc.map(|t| t.0)),
                    "b": number_or_null(abc.map(|t| t.1)),
                    "c": number_or_null(abc.map(|t| t.2)),
                    "delta_hat": number_or_null(res.diagnostics.delta_hat),
                    "n_permutations": res.diagnostics.n_permutations,
                },
                "runtime_ms": r.runtime_ms,
            })
        }
        Err(e) => json!({
            "method": r.method.as_str(),
            "error": e.to_string(),
            "runtime_ms": r.runtime_ms,
        }),
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> CliOutput {
    if crate::error::check_alpha(args.engine.alpha).is_err() {
        return CliOutput::fail(EXIT_INVALID, format!("alpha must lie in (0, 1), got {}", args.engine.alpha));
    }
    let ds = match load(&args.data) {
        Ok(ds) => ds,
        Err(e) => return e.into(),
    };
    let eng = match args.engine.engine() {
        Ok(e) => e,
        Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
    };
    let alpha = args.engine.alpha;
    let enumerable = binomial(ds.n() as u64, ds.n1() as u64).is_some_and(|c| c <= args.engine.enum_cap as u128);

    let methods: Vec<Method> = if args.method.is_empty() {
        let mut m = vec![Method::AlmostExact, Method::TslsDelta, Method::Bloom, Method::Rank];
        if enumerable || args.exact {
            m.insert(0, Method::Exact);
        }
        m
    } else {
        let mut out = Vec::new();
        for name in &args.method {
            match Method::parse(name) {
                Some(m) => out.push(m),
                None => return CliOutput::fail(EXIT_INVALID, format!("unknown method `{name}`")),
            }
        }
        if args.exact && !out.contains(&Method::Exact) {
            out.insert(0, Method::Exact);
        }
        out
    };

    let grid = GridSpec::default();
    let reports: Vec<MethodReport> = methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let (result, p_value) = match method {
                Method::Exact => (
                    exact_ci(&ds, alpha, &eng, &grid),
                    permutation_pvalue(&ds, args.null, &eng).ok().map(|t| t.p_value),
                ),
                Method::Rank => (
                    rank_ci(&ds, alpha, &eng, &grid),
                    rank_test_pvalue(&ds, args.null, &eng).ok().map(|t| t.p_value),
                ),
                Method::AlmostExact => (almost_exact_ci(&ds, alpha), None),
                Method::TslsDelta => (tsls_ci(&ds, alpha), None),
                Method::Bloom => (bloom_ci(&ds, alpha), None),
            };
            MethodReport {
                method,
                result,
                p_value,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();

    let json_doc = Value::Array(reports.iter().map(report_json).collect());
    let json_text = serde_json::to_string_pretty(&json_doc).expect("report serializes") + "\n";
    let mut stderr = String::new();
    if let Some(path) = &args.json {
        if let Err(e) = std::fs::write(path, &json_text) {
            return CliOutput::fail(EXIT_INVALID, format!("cannot write {}: {e}", path.display()));
        }
    }
    for r in &reports {
        if let Err(e) = &r.result {
            let _ = writeln!(stderr, "warning: {} failed: {e}", r.method);
        }
    }

    let stdout = match args.format {
        Format::Json => json_text,
        Format::Csv => analyze_csv(&reports),
        Format::Table => analyze_table(&ds, alpha, args.null, &reports),
    };
    CliOutput {
        code: EXIT_OK,
        stdout,
        stderr,
    }
}

fn analyze_csv(reports: &[MethodReport]) -> String {
    let mut out = String::from(
        "method,point,kind,lo,hi,hi_left,lo_right,alpha,p_value,t_stat,c_factor,a,b,c,delta_hat,runtime_ms,error\n",
    );
    let opt = |x: Option<f64>| x.map(fmt_full).unwrap_or_default();
    for r in reports {
        match &r.result {
            Ok(res) => {
                let (lo, hi, hl, lr) = endpoints(&res.interval);
                let abc = res.diagnostics.abc;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},",
                    res.method,
                    opt(res.point),
                    res.interval.kind(),
                    opt(lo),
                    opt(hi),
                    opt(hl),
                    opt(lr),
                    res.alpha,
                    opt(r.p_value),
                    fmt_full(res.diagnostics.instrument_t),
                    opt(res.diagnostics.c_factor),
                    opt(abc.map(|t| t.0)),
                    opt(abc.map(|t| t.1)),
                    opt(abc.map(|t| t.2)),
                    opt(res.diagnostics.delta_hat),
                    r.runtime_ms
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},,,,,,,,,,,,,,,{:.3},\"{}\"", r.method, r.runtime_ms, e);
            }
        }
    }
    out
}

fn fmt_full(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn endpoints(s: &IntervalSet) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    match *s {
        IntervalSet::Empty => (None, None, None, None),
        IntervalSet::Point(x) => (Some(x), Some(x), None, None),
        IntervalSet::Bounded { lo, hi } => (Some(lo), Some(hi), None, None),
        IntervalSet::LeftRay { hi } => (Some(f64::NEG_INFINITY), Some(hi), None, None),
        IntervalSet::RightRay { lo } => (Some(lo), Some(f64::INFINITY), None, None),
        IntervalSet::TwoRays { hi_left, lo_right } => (None, None, Some(hi_left), Some(lo_right)),
        IntervalSet::FullLine => (Some(f64::NEG_INFINITY), Some(f64::INFINITY), None, None),
    }
}

fn analyze_table(ds: &IvDataset, alpha: f64, null: f64, reports: &[MethodReport]) -> String {
    let mut out = String::new();
    let compliance = diff_in_means(ds.d(), ds.z()).unwrap_or(f64::NAN);
    let _ = writeln!(
        out,
        "n = {} (n1 = {}, n0 = {}), first-stage effect = {:.4}, {:.0}% intervals",
        ds.n(),
        ds.n1(),
        ds.n0(),
        compliance,
        (1.0 - alpha) * 100.0
    );
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<14}{:>10}  {:<36}{:>10}{:>12}",
        "method", "point", "interval", "p-value", "time (ms)"
    );
    let mut notes = Vec::new();
    for r in reports {
        match &r.result {
            Ok(res) => {
                let mut name = res.method.to_string();
                if res.interval.is_unbounded() || res.interval.is_empty() {
                    name.push('*');
                    let z = z_critical(alpha);
                    let what = if res.interval.is_empty() { "empty" } else { "infinite" };
                    let why = match res.method {
                        Method::AlmostExact => format!(
                            "instrument t = {:.3} is at most z = {z:.3}",
                            res.diagnostics.instrument_t
                        ),
                        _ => "the test keeps accepting far from the estimate".to_string(),
                    };
                    if res.interval.is_empty() {
                        notes.push(format!(
                            "* {}: empty set; every effect is rejected at this level, which suggests a misspecified model. This is a warning, not a failure.",
                            res.method
                        ));
                    } else {
                        notes.push(format!(
                            "* {}: {what} set ({why}). The data carry little information about the effect; this is a warning, not a failure.",
                            res.method
                        ));
                    }
                }
                let p = r.p_value.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "{:<14}{:>10}  {:<36}{:>10}{:>12.1}",
                    name,
                    res.point.map(fmt_num).unwrap_or_else(|| "-".into()),
                    format!("{:.4}", res.interval),
                    p,
                    r.runtime_ms
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{:<14}{:>10}  {:<36}", r.method.as_str(), "-", format!("unavailable ({e})"));
            }
        }
    }
    if reports.iter().any(|r| r.p_value.is_some()) {
        let _ = writeln!(out, "\np-values test an effect of {null}.");
    }
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    out
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliOutput {
    let mut cfg = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match SimulationConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
            },
            Err(e) => return CliOutput::fail(EXIT_INVALID, format!("cannot read {}: {e}", path.display())),
        },
        None => SimulationConfig::default(),
    };
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if !args.rates.is_empty() {
        cfg.compliance_rates = args.rates.clone();
    }
    if let Err(e) = cfg.validate() {
        return CliOutput::fail(EXIT_INVALID, e.to_string());
    }

    let table = match coverage_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
    };
    let sweep = if args.sweep {
        match correction_sweep(&cfg, args.sweep_lo, args.sweep_hi, args.sweep_step, args.sweep_reps) {
            Ok(rows) => Some(rows),
            Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
        }
    } else {
        None
    };

    if let Some(dir) = &args.out_dir {
        let write = |name: &str, text: &str| -> Result<(), String> {
            let p: PathBuf = Path::new(dir).join(name);
            std::fs::write(&p, text).map_err(|e| format!("cannot write {}: {e}", p.display()))
        };
        let result = std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))
            .and_then(|_| write("coverage.csv", &table.to_csv()))
            .and_then(|_| write("coverage.json", &(table.to_json() + "\n")))
            .and_then(|_| match &sweep {
                Some(rows) => write("sweep.csv", &sweep_to_csv(rows)),
                None => Ok(()),
            });
        if let Err(e) = result {
            return CliOutput::fail(EXIT_INVALID, e);
        }
    }

    let mut stdout = match args.format {
        Format::Json => table.to_json() + "\n",
        Format::Csv => table.to_csv(),
        Format::Table => {
            let mut s = format!(
                "n = {} ({}), {} replications per rate, alpha = {}, seed = {}\n\n",
                cfg.n,
                match cfg.n_interpretation {
                    crate::sim::NInterpretation::Total => "total",
                    crate::sim::NInterpretation::PerArm => "per arm",
                },
                cfg.replications,
                cfg.alpha,
                cfg.seed
            );
            s.push_str(&table.to_text());
            let worst = table.cells.iter().map(|c| c.coverage_se).fold(0.0, f64::max);
            let _ = writeln!(s, "largest coverage standard error: {worst:.4}");
            s
        }
    };
    if let (Some(rows), Format::Table) = (&sweep, args.format) {
        let xs: Vec<f64> = rows.iter().map(|r| r.pi).collect();
        let a: Vec<f64> = rows.iter().map(|r| r.mean_a).collect();
        let _ = match sustained_zero_crossing(&xs, &a, 11) {
            Some(pi) => writeln!(stdout, "\nmean quadratic coefficient a turns positive for good at compliance {pi:.3}"),
            None => writeln!(stdout, "\nmean quadratic coefficient a stays non-positive over the sweep"),
        };
        let _ = writeln!(
            stdout,
            "compliance threshold z^2/(n+z^2) = {:.4}",
            compliance_threshold(cfg.total_units(), cfg.alpha, VarianceModel::OneSidedCompliance).unwrap_or(f64::NAN)
        );
    }
    CliOutput::ok(stdout)
}

pub fn cmd_sensitivity(args: &SensitivityArgs) -> CliOutput {
    if crate::error::check_alpha(args.engine.alpha).is_err() {
        return CliOutput::fail(EXIT_INVALID, format!("alpha must lie in (0, 1), got {}", args.engine.alpha));
    }
    let ds = match load(&args.data) {
        Ok(ds) => ds,
        Err(e) => return e.into(),
    };
    let eng = match args.engine.engine() {
        Ok(e) => e,
        Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
    };
    let stat = match args.statistic {
        Statistic::Studentized => SensitivityStatistic::Studentized,
        Statistic::RankSum => SensitivityStatistic::RankSum,
    };
    let alpha = args.engine.alpha;
    let rows = match gamma_sweep(&ds, args.tau0, &args.gammas, stat, &eng) {
        Ok(r) => r,
        Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
    };
    let gamma_star = match sensitivity_value(&ds, args.tau0, alpha, stat, &eng) {
        Ok(g) => g,
        Err(e) => return CliOutput::fail(EXIT_INVALID, e.to_string()),
    };
    let stat_name = match stat {
        SensitivityStatistic::Studentized => "studentized",
        SensitivityStatistic::RankSum => "rank_sum",
    };
    let stdout = match args.format {
        Format::Json => {
            let doc = json!({
                "statistic": stat_name,
                "tau0": args.tau0,
                "alpha": alpha,
                "rows": rows,
                "gamma_star": number_or_null(Some(gamma_star)),
            });
            serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
        }
        Format::Csv => {
            let mut s = String::from("gamma,p_low,p_high\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{}", r.gamma, r.p_low, r.p_high);
            }
            s
        }
        Format::Table => {
            let mut s = format!(
                "{stat_name} statistic, effect {} tested at alpha = {alpha}\n\n{:>8}{:>12}{:>12}\n",
                args.tau0, "gamma", "p_low", "p_high"
            );
            for r in &rows {
                let _ = writeln!(s, "{:>8}{:>12.6}{:>12.6}", r.gamma, r.p_low, r.p_high);
            }
            s.push('\n');
            if gamma_star == 1.0 {
                let _ = writeln!(
                    s,
                    "gamma* = 1.0: the test does not reject at gamma = 1, so there is no finding to explain away."
                );
            } else if gamma_star.is_infinite() {
                let _ = writeln!(s, "gamma* = inf: the upper bound never exceeds alpha.");
            } else {
                let _ = writeln!(
                    s,
                    "gamma* = {gamma_star:.2}: the upper p-value bound first exceeds {alpha} here."
                );
            }
            s
        }
    };
    CliOutput::ok(stdout)
}
