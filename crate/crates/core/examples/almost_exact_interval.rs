//! The closed-form almost-exact interval: the quadratic behind it, the
//! shape of the solution set, and how it turns infinite once the
//! instrument's t-statistic drops below the normal critical value.
//!
//! ```text
//! cargo run --example almost_exact_interval
//! ```

use ivrand::{
    almost_exact_ci, compliance_threshold, generate_onesided, instrument_t_stat, moment_summary,
    quadratic_coefficients, z_critical, SimulationConfig, VarianceModel,
};

fn main() -> Result<(), ivrand::Error> {
    let alpha = 0.05;
    let cfg = SimulationConfig::default();
    println!("{:>6} {:>8} {:>10} {:>10} {:>10}  set", "pi", "t", "a", "b", "c");
    for pi in [0.03, 0.08, 0.15, 0.4, 0.8] {
        let ds = generate_onesided(&cfg, pi, 42)?.data;
        let ms = moment_summary(&ds)?;
        let qc = quadratic_coefficients(&ms, alpha)?;
        let res = almost_exact_ci(&ds, alpha)?;
        println!(
            "{pi:>6} {:>8.3} {:>10.4} {:>10.4} {:>10.4}  {:.3} ({})",
            instrument_t_stat(&ms)?,
            qc.a,
            qc.b,
            qc.c,
            res.interval,
            res.interval.kind()
        );
    }
    println!(
        "\nthe set is bounded exactly when t > z = {:.3} (a > 0)",
        z_critical(alpha)
    );
    let threshold = compliance_threshold(cfg.total_units(), alpha, VarianceModel::OneSidedCompliance)?;
    println!("one-sided compliance threshold for n = {}: {threshold:.4}", cfg.total_units());
    Ok(())
}
