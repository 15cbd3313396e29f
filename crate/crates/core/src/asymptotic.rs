//! Normal-approximation intervals around the Wald estimate: the delta
//! method (identical to the usual TSLS interval) and the Bloom interval,
//! which treats the first stage as known.

use crate::almost_exact::delta_hat;
use crate::error::{check_alpha, Error, Result};
use crate::estimators::{instrument_t_stat, moment_summary};
use crate::model::{Diagnostics, InferenceResult, IntervalSet, IvDataset, Method, MomentSummary};
use crate::normal::z_critical;

/// Delta-method variance of `tau_Y / tau_D`.
pub fn delta_variance(ms: &MomentSummary) -> Result<f64> {
    let d = ms.tau_d;
    if d == 0.0 {
        return Err(Error::ZeroFirstStage);
    }
    let y = ms.tau_y;
    Ok(ms.var_y / (d * d) + y * y * ms.var_d / d.powi(4) - 2.0 * y * ms.cov / d.powi(3))
}

/// Variance of the Wald ratio with the first stage held fixed.
pub fn bloom_variance(ms: &MomentSummary) -> Result<f64> {
    if ms.tau_d == 0.0 {
        return Err(Error::ZeroFirstStage);
    }
    Ok(ms.var_y / (ms.tau_d * ms.tau_d))
}

/// `C` with `delta_variance = bloom_variance * C`.
pub fn c_factor(ms: &MomentSummary) -> Result<f64> {
    let d = ms.tau_d;
    if d == 0.0 {
        return Err(Error::ZeroFirstStage);
    }
    if ms.var_y <= 0.0 {
        return Err(Error::ZeroOutcomeVariance);
    }
    let y = ms.tau_y;
    Ok(1.0 + y * y * ms.var_d / (d * d * ms.var_y) - 2.0 * y * ms.cov / (d * ms.var_y))
}

fn wald_interval(
    ds: &IvDataset,
    alpha: f64,
    method: Method,
    variance: fn(&MomentSummary) -> Result<f64>,
) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let ms = moment_summary(ds)?;
    let v = variance(&ms)?;
    let point = ms.tau_y / ms.tau_d;
    // rounding can push a zero variance marginally negative
    let half = z_critical(alpha) * v.max(0.0).sqrt();
    Ok(InferenceResult {
        method,
        point: Some(point),
        interval: IntervalSet::bounded(point - half, point + half),
        alpha,
        diagnostics: Diagnostics {
            instrument_t: instrument_t_stat(&ms).unwrap_or(0.0),
            c_factor: c_factor(&ms).ok(),
            delta_hat: Some(delta_hat(&ms)),
            ..Diagnostics::default()
        },
    })
}

/// `tau_hat +/- z sqrt(delta_variance)`.
pub fn tsls_ci(ds: &IvDataset, alpha: f64) -> Result<InferenceResult> {
    wald_interval(ds, alpha, Method::TslsDelta, delta_variance)
}

/// `tau_hat +/- z sqrt(var_Y) / |tau_D|`.
pub fn bloom_ci(ds: &IvDataset, alpha: f64) -> Result<InferenceResult> {
    wald_interval(ds, alpha, Method::Bloom, bloom_variance)
}

/// Checks that `tau_hat +/- z sqrt(delta_hat) / tau_D^2` reproduces the
/// delta-method endpoints to relative error 1e-10.
pub fn delta_rewrite_check(ms: &MomentSummary, alpha: f64) -> bool {
    let (Ok(v), Ok(())) = (delta_variance(ms), check_alpha(alpha)) else {
        return false;
    };
    let z = z_critical(alpha);
    let point = ms.tau_y / ms.tau_d;
    let direct = z * v.max(0.0).sqrt();
    let rewritten = z * delta_hat(ms).max(0.0).sqrt() / (ms.tau_d * ms.tau_d);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    close(point - direct, point - rewritten) && close(point + direct, point + rewritten)
}
