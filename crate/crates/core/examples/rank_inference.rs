//! Rank-based inference for a constant additive effect: the Wilcoxon
//! rank-sum test on adjusted responses, its confidence set, and the
//! Hodges-Lehmann point estimate.
//!
//! ```text
//! cargo run --release --example rank_inference
//! ```

use ivrand::{
    generate_onesided, hodges_lehmann, rank_adjusted, rank_ci, rank_test_pvalue, wilcoxon_rank_sum,
    GridSpec, PermutationEngine, SimulationConfig,
};

fn main() -> Result<(), ivrand::Error> {
    let cfg = SimulationConfig {
        n: 24,
        ..SimulationConfig::default()
    };
    let ds = generate_onesided(&cfg, 0.8, 5)?.data;
    let eng = PermutationEngine::auto(1);

    for beta in [0.0, 1.0, 2.0] {
        let w = wilcoxon_rank_sum(&rank_adjusted(&ds, beta), ds.z());
        let p = rank_test_pvalue(&ds, beta, &eng)?.p_value;
        println!("beta0 = {beta}: W = {w}, two-sided p = {p:.4}");
    }
    let ci = rank_ci(&ds, 0.05, &eng, &GridSpec::default())?;
    println!("\n95% rank interval: {:.4}", ci.interval);
    println!("Hodges-Lehmann estimate: {:.4}", hodges_lehmann(&ds)?);
    Ok(())
}
