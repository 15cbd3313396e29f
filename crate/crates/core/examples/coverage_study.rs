//! Coverage, median length and infinite-interval frequency of the
//! almost-exact, Bloom and TSLS intervals under one-sided noncompliance.
//!
//! ```text
//! cargo run --release --example coverage_study -- [replications] [seed]
//! ```

use ivrand::{coverage_experiment, SimulationConfig};

fn main() -> Result<(), ivrand::Error> {
    let mut args = std::env::args().skip(1);
    let mut cfg = SimulationConfig::default();
    if let Some(r) = args.next() {
        cfg.replications = r.parse().expect("replications must be an integer");
    }
    if let Some(s) = args.next() {
        cfg.seed = s.parse().expect("seed must be an integer");
    }

    let start = std::time::Instant::now();
    let table = coverage_experiment(&cfg)?;
    println!(
        "n = {}, {} replications per rate, alpha = {}, true effect = {}\n",
        cfg.n, cfg.replications, cfg.alpha, table.truth
    );
    print!("{}", table.to_text());
    println!("finished in {:.1?}", start.elapsed());
    Ok(())
}
