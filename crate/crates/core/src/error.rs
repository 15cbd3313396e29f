use thiserror::Error;

/// Errors raised by dataset validation and the inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column lengths differ: y={y}, d={d}, z={z}")]
    LengthMismatch { y: usize, d: usize, z: usize },

    #[error("instrument value {value} at row {index} is not 0 or 1")]
    NonBinaryInstrument { index: usize, value: f64 },

    #[error("degenerate assignment arm: n1={n1}, n0={n0}")]
    DegenerateArm { n1: usize, n0: usize },

    #[error("non-finite value in column `{column}` at row {index}")]
    NonFiniteValue { column: &'static str, index: usize },

    #[error("need at least 4 units, got {n}")]
    TooFewUnits { n: usize },

    #[error("first-stage difference in means is zero; the Wald ratio is undefined")]
    ZeroFirstStage,

    #[error("first-stage variance estimate and difference in means are both zero")]
    ZeroVariance,

    #[error("outcome variance estimate is zero")]
    ZeroOutcomeVariance,

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("full enumeration needs {size} assignments, cap is {cap}")]
    EnumerationTooLarge { size: u128, cap: u64 },

    #[error("Monte Carlo needs at least 1000 draws, got {0}")]
    TooFewDraws(usize),

    #[error("test inversion did not resolve the confidence set: {0}")]
    GridTooCoarse(String),

    #[error("rank-sum statistic never crosses its null expectation")]
    Unidentified,

    #[error("sensitivity parameter gamma must be >= 1, got {0}")]
    InvalidGamma(f64),

    #[error("covariate design is rank deficient")]
    RankDeficient,

    #[error("too few rows ({n}) for {p} covariates plus intercept")]
    TooFewRows { n: usize, p: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}
