//! Wald-type intervals: TSLS with the delta-method variance and the Bloom
//! interval that treats the first stage as known, plus the factor C that
//! separates their variances.
//!
//! ```text
//! cargo run --example asymptotic_intervals
//! ```

use ivrand::{
    bloom_ci, bloom_variance, c_factor, delta_variance, generate_onesided, moment_summary, tsls_ci,
    SimulationConfig,
};

fn main() -> Result<(), ivrand::Error> {
    let cfg = SimulationConfig::default();
    println!("{:>5} {:>9} {:>9} {:>7}  {:<22} {:<22}", "pi", "var_dm", "var_bl", "C", "tsls", "bloom");
    for pi in [0.1, 0.3, 0.6, 0.9] {
        let ds = generate_onesided(&cfg, pi, 7)?.data;
        let ms = moment_summary(&ds)?;
        let tsls = tsls_ci(&ds, 0.05)?;
        let bloom = bloom_ci(&ds, 0.05)?;
        println!(
            "{pi:>5} {:>9.4} {:>9.4} {:>7.3}  {:<22} {:<22}",
            delta_variance(&ms)?,
            bloom_variance(&ms)?,
            c_factor(&ms)?,
            format!("{:.3}", tsls.interval),
            format!("{:.3}", bloom.interval)
        );
    }
    println!("\nC < 1 means the delta-method interval is the narrower of the two.");
    Ok(())
}
