//! Randomization inference for instrumental-variables designs.
//!
//! Exact permutation intervals, the closed-form almost-exact interval,
//! delta-method (TSLS) and Bloom intervals, rank-based inference, Γ
//! sensitivity bounds, covariate adjustment and a Monte Carlo harness for
//! coverage studies.

pub mod almost_exact;
pub mod asymptotic;
pub mod cli;
pub mod covariates;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod inversion;
pub mod model;
pub mod normal;
pub mod permutation;
pub mod rank;
pub mod sensitivity;
pub mod sim;

pub use almost_exact::{
    almost_exact_ci, closed_form_endpoints, compliance_threshold, delta_hat,
    quadratic_coefficients, solve_quadratic_leq, QuadraticCoefficients, VarianceModel,
};
pub use asymptotic::{bloom_ci, bloom_variance, c_factor, delta_rewrite_check, delta_variance, tsls_ci};
pub use covariates::{adjusted_dataset, adjusted_dataset_with, residualize};
pub use error::{Error, Result};
pub use estimators::{diff_in_means, instrument_t_stat, moment_summary, wald_estimate};
pub use exact::{adjusted_responses, exact_ci, permutation_pvalue, studentized_statistic, TestResult};
pub use inversion::GridSpec;
pub use model::{Diagnostics, InferenceResult, IntervalSet, IvDataset, Method, MomentSummary};
pub use normal::{normal_quantile, z_critical};
pub use permutation::{AssignmentPlan, PermutationEngine, PermutationMode};
pub use rank::{
    hodges_lehmann, rank_adjusted, rank_ci, rank_test_pvalue, wilcoxon_rank_sum, EffectModel,
};
pub use sensitivity::{
    gamma_pvalue_bounds, gamma_sweep, sensitivity_value, GammaModel, PValueBounds,
    SensitivityStatistic,
};
pub use sim::{
    correction_sweep, coverage_experiment, coverage_experiment_with, generate_onesided, sustained_zero_crossing, sweep_to_csv,
    CoverageCell, CoverageTable, IntervalProcedure, NInterpretation, SimulationConfig, SweepRow,
    ZeroFirstStage,
};
