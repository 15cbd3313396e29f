//! Sensitivity of a permutation test to biased instrument assignment: the
//! range of p-values when assignment odds may differ by a factor of up to
//! gamma, and the gamma at which significance could be lost.
//!
//! ```text
//! cargo run --release --example sensitivity_analysis
//! ```

use ivrand::{
    gamma_sweep, generate_onesided, sensitivity_value, PermutationEngine, SensitivityStatistic,
    SimulationConfig,
};

fn main() -> Result<(), ivrand::Error> {
    let cfg = SimulationConfig {
        n: 40,
        ..SimulationConfig::default()
    };
    let ds = generate_onesided(&cfg, 0.8, 9)?.data;
    let eng = PermutationEngine::auto(2);
    let gammas = [1.0, 1.25, 1.5, 2.0, 3.0];

    for stat in [SensitivityStatistic::Studentized, SensitivityStatistic::RankSum] {
        println!("{stat:?}, no effect hypothesised");
        println!("{:>7} {:>10} {:>10}", "gamma", "p_low", "p_high");
        for b in gamma_sweep(&ds, 0.0, &gammas, stat, &eng)? {
            println!("{:>7} {:>10.5} {:>10.5}", b.gamma, b.p_low, b.p_high);
        }
        let g = sensitivity_value(&ds, 0.0, 0.05, stat, &eng)?;
        println!("gamma* = {g:.2}\n");
    }
    Ok(())
}
