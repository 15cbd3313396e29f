//! Covariate adjustment: residualize the outcome on baseline covariates
//! and run any interval method on the residuals. A prognostic covariate
//! tightens the intervals without touching the randomization.
//!
//! ```text
//! cargo run --example covariate_adjustment
//! ```

use ivrand::{adjusted_dataset, almost_exact_ci, residualize, tsls_ci, IvDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), ivrand::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 80;
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let z: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let d: Vec<f64> = z.iter().map(|&zi| if zi == 1.0 && rng.random::<f64>() < 0.6 { 1.0 } else { 0.0 }).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 2.0 * d[i] + 1.5 * x[i] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ds = IvDataset::new(y, d, &z)?;
    let adjusted = adjusted_dataset(&ds, std::slice::from_ref(&x))?;

    for (label, data) in [("raw", &ds), ("adjusted", &adjusted)] {
        let ae = almost_exact_ci(data, 0.05)?;
        let ts = tsls_ci(data, 0.05)?;
        println!(
            "{label:>9}: almost-exact {:.3} (length {:.3}), tsls {:.3}",
            ae.interval,
            ae.interval.length(),
            ts.interval
        );
    }

    let resid = residualize(ds.y(), std::slice::from_ref(&x))?;
    let dot: f64 = resid.iter().zip(&x).map(|(r, xi)| r * xi).sum();
    println!("\nresiduals are orthogonal to the covariate: {dot:.2e}");
    Ok(())
}
