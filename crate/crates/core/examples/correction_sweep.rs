//! Mean quadratic coefficients across low compliance rates, written as
//! CSV for plotting, with the rates where `a` and the discriminant turn
//! positive for good.
//!
//! ```text
//! cargo run --release --example correction_sweep -- [replicates] > sweep.csv
//! ```

use ivrand::{correction_sweep, sustained_zero_crossing, sweep_to_csv, SimulationConfig};

fn main() -> Result<(), ivrand::Error> {
    let reps = std::env::args()
        .nth(1)
        .map(|r| r.parse().expect("replicates must be an integer"))
        .unwrap_or(1000);
    let cfg = SimulationConfig::default();
    let rows = correction_sweep(&cfg, 0.01, 0.10, 0.001, reps)?;
    print!("{}", sweep_to_csv(&rows));

    let xs: Vec<f64> = rows.iter().map(|r| r.pi).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.mean_a).collect();
    let disc: Vec<f64> = rows.iter().map(|r| r.mean_disc).collect();
    eprintln!("mean a turns positive at {:?}", sustained_zero_crossing(&xs, &a, 11));
    eprintln!("mean discriminant turns positive at {:?}", sustained_zero_crossing(&xs, &disc, 11));
    Ok(())
}
