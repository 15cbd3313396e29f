//! Difference-in-means point estimators and the two-sample
//! variance/covariance estimators for `tau_Y` and `tau_D`.

use crate::error::{Error, Result};
use crate::model::{IvDataset, MomentSummary};

/// `mean(v | z = 1) - mean(v | z = 0)`.
pub fn diff_in_means(v: &[f64], z: &[bool]) -> Result<f64> {
    if v.len() != z.len() {
        return Err(Error::LengthMismatch {
            y: v.len(),
            d: v.len(),
            z: z.len(),
        });
    }
    let (mut s1, mut s0, mut n1, mut n0) = (0.0, 0.0, 0usize, 0usize);
    for (&x, &t) in v.iter().zip(z) {
        if t {
            s1 += x;
            n1 += 1;
        } else {
            s0 += x;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::DegenerateArm { n1, n0 });
    }
    Ok(s1 / n1 as f64 - s0 / n0 as f64)
}

/// The Wald ratio `tau_Y / tau_D`, which is also the TSLS coefficient.
pub fn wald_estimate(ds: &IvDataset) -> Result<f64> {
    let tau_d = diff_in_means(ds.d(), ds.z())?;
    if tau_d == 0.0 {
        return Err(Error::ZeroFirstStage);
    }
    Ok(diff_in_means(ds.y(), ds.z())? / tau_d)
}

/// Per-arm means and centred second moments, computed in two passes.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ArmMoments {
    pub n: usize,
    pub mean_y: f64,
    pub mean_d: f64,
    pub ss_y: f64,
    pub ss_d: f64,
    pub sp_yd: f64,
}

impl ArmMoments {
    pub fn compute(y: &[f64], d: &[f64], z: &[bool], arm: bool) -> Self {
        let mut m = ArmMoments::default();
        for i in (0..z.len()).filter(|&i| z[i] == arm) {
            m.n += 1;
            m.mean_y += y[i];
            m.mean_d += d[i];
        }
        if m.n == 0 {
            return m;
        }
        m.mean_y /= m.n as f64;
        m.mean_d /= m.n as f64;
        for i in (0..z.len()).filter(|&i| z[i] == arm) {
            let (ey, ed) = (y[i] - m.mean_y, d[i] - m.mean_d);
            m.ss_y += ey * ey;
            m.ss_d += ed * ed;
            m.sp_yd += ey * ed;
        }
        m
    }

    /// Divisor turning a centred sum of squares into the variance of the arm mean.
    fn scale(&self) -> f64 {
        1.0 / (self.n as f64 * (self.n as f64 - 1.0))
    }
}

pub fn moment_summary(ds: &IvDataset) -> Result<MomentSummary> {
    ds.require_variance_arms()?;
    let t = ArmMoments::compute(ds.y(), ds.d(), ds.z(), true);
    let c = ArmMoments::compute(ds.y(), ds.d(), ds.z(), false);
    Ok(MomentSummary {
        tau_y: t.mean_y - c.mean_y,
        tau_d: t.mean_d - c.mean_d,
        var_y: t.ss_y * t.scale() + c.ss_y * c.scale(),
        var_d: t.ss_d * t.scale() + c.ss_d * c.scale(),
        cov: t.sp_yd * t.scale() + c.sp_yd * c.scale(),
    })
}

/// `|tau_D / sqrt(var_D)|`. A perfectly measured non-zero first stage gives
/// `inf`; zero difference with zero variance is [`Error::ZeroVariance`].
pub fn instrument_t_stat(ms: &MomentSummary) -> Result<f64> {
    if ms.var_d <= 0.0 {
        return if ms.tau_d == 0.0 {
            Err(Error::ZeroVariance)
        } else {
            Ok(f64::INFINITY)
        };
    }
    Ok((ms.tau_d / ms.var_d.sqrt()).abs())
}
