//! Covariate adjustment: replace the outcome by its least-squares residuals
//! on baseline covariates (plus an intercept) and run any method on them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::IvDataset;

/// Columns whose QR diagonal falls below this fraction of the largest are
/// treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares residuals of `v` on `[1, x_1, ..., x_p]`, via Householder QR.
/// `columns` holds the `p` covariates, each of length `n`.
pub fn residualize(v: &[f64], columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = v.len();
    let p = columns.len();
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            y: n,
            d: c.len(),
            z: n,
        });
    }
    if n <= p + 1 {
        return Err(Error::TooFewRows { n, p });
    }
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let qr = x.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..=p).map(|j| r[(j, j)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= RANK_TOLERANCE * largest) {
        return Err(Error::RankDeficient);
    }
    let q = qr.q();
    let y = DVector::from_column_slice(v);
    let fitted = &q * (q.transpose() * &y);
    Ok((y - fitted).iter().copied().collect())
}

/// The dataset with `y` replaced by its residuals on `columns`.
pub fn adjusted_dataset(ds: &IvDataset, columns: &[Vec<f64>]) -> Result<IvDataset> {
    adjusted_dataset_with(ds, columns, false)
}

/// As [`adjusted_dataset`], optionally residualizing `d` as well.
pub fn adjusted_dataset_with(
    ds: &IvDataset,
    columns: &[Vec<f64>],
    residualize_treatment: bool,
) -> Result<IvDataset> {
    let adjusted = ds.with_outcome(residualize(ds.y(), columns)?)?;
    if residualize_treatment {
        adjusted.with_treatment(residualize(ds.d(), columns)?)
    } else {
        Ok(adjusted)
    }
}
