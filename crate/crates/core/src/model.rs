//! Domain types shared by every inference method: the validated dataset,
//! the solution set of a confidence procedure, moment summaries and results.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed `(Y, D, Z)` triples for `n` units.
///
/// `d` is stored as a real so multi-valued doses need no separate type.
#[derive(Debug, Clone, PartialEq)]
pub struct IvDataset {
    y: Vec<f64>,
    d: Vec<f64>,
    z: Vec<bool>,
    n1: usize,
    n0: usize,
}

impl IvDataset {
    /// Validates raw columns. The instrument is passed as reals so that a
    /// stray `2` or `0.5` is reported instead of silently truncated.
    pub fn new(y: Vec<f64>, d: Vec<f64>, z: &[f64]) -> Result<Self> {
        if y.len() != d.len() || y.len() != z.len() {
            return Err(Error::LengthMismatch {
                y: y.len(),
                d: d.len(),
                z: z.len(),
            });
        }
        for (column, values) in [("y", &y[..]), ("d", &d[..]), ("z", z)] {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { column, index });
            }
        }
        let mut zb = Vec::with_capacity(z.len());
        for (index, &value) in z.iter().enumerate() {
            if value == 1.0 {
                zb.push(true);
            } else if value == 0.0 {
                zb.push(false);
            } else {
                return Err(Error::NonBinaryInstrument { index, value });
            }
        }
        Self::from_parts(y, d, zb)
    }

    /// Same checks as [`IvDataset::new`] for an instrument that is already boolean.
    pub fn from_bools(y: Vec<f64>, d: Vec<f64>, z: Vec<bool>) -> Result<Self> {
        if y.len() != d.len() || y.len() != z.len() {
            return Err(Error::LengthMismatch {
                y: y.len(),
                d: d.len(),
                z: z.len(),
            });
        }
        for (column, values) in [("y", &y[..]), ("d", &d[..])] {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { column, index });
            }
        }
        Self::from_parts(y, d, z)
    }

    fn from_parts(y: Vec<f64>, d: Vec<f64>, z: Vec<bool>) -> Result<Self> {
        let n1 = z.iter().filter(|&&b| b).count();
        let n0 = z.len() - n1;
        if n1 == 0 || n0 == 0 {
            return Err(Error::DegenerateArm { n1, n0 });
        }
        if z.len() < 4 {
            return Err(Error::TooFewUnits { n: z.len() });
        }
        Ok(Self { y, d, z, n1, n0 })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Returns a copy with the outcome column replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        Self::from_bools(y, self.d.clone(), self.z.clone())
    }

    /// Returns a copy with the treatment column replaced.
    pub fn with_treatment(&self, d: Vec<f64>) -> Result<Self> {
        Self::from_bools(self.y.clone(), d, self.z.clone())
    }

    pub(crate) fn require_variance_arms(&self) -> Result<()> {
        if self.n1 < 2 || self.n0 < 2 {
            Err(Error::DegenerateArm {
                n1: self.n1,
                n0: self.n0,
            })
        } else {
            Ok(())
        }
    }
}

/// The solution set of a confidence procedure. Endpoints are closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalSet {
    Empty,
    Point(f64),
    Bounded { lo: f64, hi: f64 },
    /// `(-inf, hi]`
    LeftRay { hi: f64 },
    /// `[lo, inf)`
    RightRay { lo: f64 },
    /// `(-inf, hi_left] ∪ [lo_right, inf)` with `hi_left < lo_right`.
    TwoRays { hi_left: f64, lo_right: f64 },
    FullLine,
}

impl IntervalSet {
    /// Bounded interval; collapses to `Point` when `lo == hi`.
    ///
    /// Panics if `lo > hi` or either endpoint is NaN.
    pub fn bounded(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "bounded interval needs lo <= hi, got [{lo}, {hi}]");
        if lo == hi {
            IntervalSet::Point(lo)
        } else {
            IntervalSet::Bounded { lo, hi }
        }
    }

    /// Union of two rays; a non-positive gap covers the whole line.
    pub fn two_rays(hi_left: f64, lo_right: f64) -> Self {
        if hi_left < lo_right {
            IntervalSet::TwoRays { hi_left, lo_right }
        } else {
            IntervalSet::FullLine
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            IntervalSet::Empty => false,
            IntervalSet::Point(p) => x == p,
            IntervalSet::Bounded { lo, hi } => lo <= x && x <= hi,
            IntervalSet::LeftRay { hi } => x <= hi,
            IntervalSet::RightRay { lo } => x >= lo,
            IntervalSet::TwoRays { hi_left, lo_right } => x <= hi_left || x >= lo_right,
            IntervalSet::FullLine => !x.is_nan(),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            IntervalSet::Empty | IntervalSet::Point(_) => 0.0,
            IntervalSet::Bounded { lo, hi } => hi - lo,
            _ => f64::INFINITY,
        }
    }

    /// True for rays, two rays and the full line.
    pub fn is_unbounded(&self) -> bool {
        matches!(
            self,
            IntervalSet::LeftRay { .. }
                | IntervalSet::RightRay { .. }
                | IntervalSet::TwoRays { .. }
                | IntervalSet::FullLine
        )
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, IntervalSet::Empty)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            IntervalSet::Empty => "empty",
            IntervalSet::Point(_) => "point",
            IntervalSet::Bounded { .. } => "bounded",
            IntervalSet::LeftRay { .. } => "left_ray",
            IntervalSet::RightRay { .. } => "right_ray",
            IntervalSet::TwoRays { .. } => "two_rays",
            IntervalSet::FullLine => "full_line",
        }
    }

    /// Lebesgue measure of the symmetric difference with `other`, for
    /// bounded sets (`Empty`, `Point`, `Bounded`). `None` otherwise.
    pub fn symmetric_difference_length(&self, other: &IntervalSet) -> Option<f64> {
        let span = |s: &IntervalSet| match *s {
            IntervalSet::Empty => Some(None),
            IntervalSet::Point(p) => Some(Some((p, p))),
            IntervalSet::Bounded { lo, hi } => Some(Some((lo, hi))),
            _ => None,
        };
        let (a, b) = (span(self)?, span(other)?);
        let len = |s: Option<(f64, f64)>| s.map_or(0.0, |(lo, hi)| hi - lo);
        let overlap = match (a, b) {
            (Some((a0, a1)), Some((b0, b1))) => (a1.min(b1) - a0.max(b0)).max(0.0),
            _ => 0.0,
        };
        Some(len(a) + len(b) - 2.0 * overlap)
    }
}

fn fmt_endpoint(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match f.precision() {
        Some(p) => write!(f, "{x:.p$}"),
        None => write!(f, "{x}"),
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            IntervalSet::Empty => write!(f, "∅"),
            IntervalSet::Point(p) => {
                write!(f, "{{")?;
                fmt_endpoint(p, f)?;
                write!(f, "}}")
            }
            IntervalSet::Bounded { lo, hi } => {
                write!(f, "[")?;
                fmt_endpoint(lo, f)?;
                write!(f, ", ")?;
                fmt_endpoint(hi, f)?;
                write!(f, "]")
            }
            IntervalSet::LeftRay { hi } => {
                write!(f, "(-inf, ")?;
                fmt_endpoint(hi, f)?;
                write!(f, "]")
            }
            IntervalSet::RightRay { lo } => {
                write!(f, "[")?;
                fmt_endpoint(lo, f)?;
                write!(f, ", inf)")
            }
            IntervalSet::TwoRays { hi_left, lo_right } => {
                write!(f, "(-inf, ")?;
                fmt_endpoint(hi_left, f)?;
                write!(f, "] ∪ [")?;
                fmt_endpoint(lo_right, f)?;
                write!(f, ", inf)")
            }
            IntervalSet::FullLine => write!(f, "(-inf, inf)"),
        }
    }
}

/// JSON endpoint: a number, or the strings `"-inf"` / `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Endpoint(f64);

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Endpoint(x)),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(Endpoint(f64::INFINITY)),
                "-inf" => Ok(Endpoint(f64::NEG_INFINITY)),
                other => Err(de::Error::custom(format!("bad endpoint `{other}`"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lo: Option<Endpoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    hi: Option<Endpoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    hi_left: Option<Endpoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lo_right: Option<Endpoint>,
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let e = |x: f64| Some(Endpoint(x));
        let (lo, hi, hi_left, lo_right) = match *self {
            IntervalSet::Empty => (None, None, None, None),
            IntervalSet::Point(p) => (e(p), e(p), None, None),
            IntervalSet::Bounded { lo, hi } => (e(lo), e(hi), None, None),
            IntervalSet::LeftRay { hi } => (e(f64::NEG_INFINITY), e(hi), None, None),
            IntervalSet::RightRay { lo } => (e(lo), e(f64::INFINITY), None, None),
            IntervalSet::TwoRays { hi_left, lo_right } => (None, None, e(hi_left), e(lo_right)),
            IntervalSet::FullLine => (e(f64::NEG_INFINITY), e(f64::INFINITY), None, None),
        };
        IntervalRepr {
            kind: self.kind().to_owned(),
            lo,
            hi,
            hi_left,
            lo_right,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = IntervalRepr::deserialize(d)?;
        let need = |v: Option<Endpoint>, name: &str| {
            v.map(|e| e.0)
                .ok_or_else(|| de::Error::custom(format!("`{}` interval needs `{name}`", r.kind)))
        };
        Ok(match r.kind.as_str() {
            "empty" => IntervalSet::Empty,
            "point" => IntervalSet::Point(need(r.lo, "lo")?),
            "bounded" => {
                let (lo, hi) = (need(r.lo, "lo")?, need(r.hi, "hi")?);
                if !(lo <= hi) {
                    return Err(de::Error::custom("bounded interval needs lo <= hi"));
                }
                IntervalSet::Bounded { lo, hi }
            }
            "left_ray" => IntervalSet::LeftRay {
                hi: need(r.hi, "hi")?,
            },
            "right_ray" => IntervalSet::RightRay {
                lo: need(r.lo, "lo")?,
            },
            "two_rays" => {
                let (hl, lr) = (need(r.hi_left, "hi_left")?, need(r.lo_right, "lo_right")?);
                if !(hl < lr) {
                    return Err(de::Error::custom("two_rays needs hi_left < lo_right"));
                }
                IntervalSet::TwoRays {
                    hi_left: hl,
                    lo_right: lr,
                }
            }
            "full_line" => IntervalSet::FullLine,
            other => return Err(de::Error::custom(format!("unknown interval kind `{other}`"))),
        })
    }
}

/// Differences in means for outcome and treatment with their
/// finite-population variance and covariance estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub tau_y: f64,
    pub tau_d: f64,
    pub var_y: f64,
    pub var_d: f64,
    pub cov: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    AlmostExact,
    TslsDelta,
    Bloom,
    Rank,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::AlmostExact => "almost_exact",
            Method::TslsDelta => "tsls_delta",
            Method::Bloom => "bloom",
            Method::Rank => "rank",
        }
    }

    /// Accepts the canonical names plus `tsls` / `delta` / `almost-exact`.
    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" => Some(Method::Exact),
            "almost_exact" | "ae" => Some(Method::AlmostExact),
            "tsls_delta" | "tsls" | "delta" => Some(Method::TslsDelta),
            "bloom" => Some(Method::Bloom),
            "rank" | "wilcoxon" => Some(Method::Rank),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `|tau_d / sqrt(var_d)|`, the first-stage strength statistic.
    pub instrument_t: f64,
    pub c_factor: Option<f64>,
    pub abc: Option<(f64, f64, f64)>,
    pub delta_hat: Option<f64>,
    pub n_permutations: Option<u64>,
    /// Number of disjoint retained pieces found by grid inversion, when
    /// more than the reported set can represent.
    pub disjoint_pieces: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub method: Method,
    pub point: Option<f64>,
    pub interval: IntervalSet,
    pub alpha: f64,
    pub diagnostics: Diagnostics,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_well_formed_input() {
        let ds = IvDataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.0, 0.0, 1.0, 0.0],
            &[1.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!((ds.n1(), ds.n0(), ds.n()), (2, 2, 4));
    }

    #[test]
    fn rejects_malformed_input() {
        assert_eq!(
            IvDataset::new(vec![1.0, 2.0], vec![1.0, 0.0], &[1.0, 1.0]),
            Err(Error::DegenerateArm { n1: 2, n0: 0 })
        );
        assert!(matches!(
            IvDataset::new(vec![1.0, 2.0, 3.0], vec![1.0, 0.0, 1.0], &[1.0, 0.0, 2.0]),
            Err(Error::NonBinaryInstrument { index: 2, .. })
        ));
        assert!(matches!(
            IvDataset::new(vec![1.0; 4], vec![1.0; 3], &[1.0, 0.0, 1.0, 0.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert_eq!(
            IvDataset::new(
                vec![1.0, f64::NAN, 0.0, 0.0],
                vec![0.0; 4],
                &[1.0, 0.0, 1.0, 0.0]
            ),
            Err(Error::NonFiniteValue {
                column: "y",
                index: 1
            })
        );
        assert_eq!(
            IvDataset::new(vec![1.0; 3], vec![0.0; 3], &[1.0, 0.0, 1.0]),
            Err(Error::TooFewUnits { n: 3 })
        );
    }

    #[test]
    fn interval_membership_and_length() {
        assert!(IntervalSet::bounded(-1.0, 1.0).contains(0.0));
        assert!(!IntervalSet::two_rays(-1.0, 1.0).contains(0.0));
        assert!(IntervalSet::two_rays(-1.0, 1.0).contains(1.0));
        assert!(IntervalSet::FullLine.contains(1e9));
        assert!(!IntervalSet::Empty.contains(0.0));
        assert_eq!(IntervalSet::bounded(2.0, 5.0).length(), 3.0);
        assert_eq!(IntervalSet::two_rays(0.0, 1.0).length(), f64::INFINITY);
        assert_eq!(IntervalSet::Empty.length(), 0.0);
        assert_eq!(IntervalSet::Point(3.0).length(), 0.0);
        assert_eq!(IntervalSet::bounded(2.0, 2.0), IntervalSet::Point(2.0));
        assert_eq!(IntervalSet::two_rays(1.0, 1.0), IntervalSet::FullLine);
    }

    #[test]
    fn symmetric_difference() {
        let a = IntervalSet::bounded(0.0, 2.0);
        let b = IntervalSet::bounded(1.0, 4.0);
        assert_eq!(a.symmetric_difference_length(&b), Some(1.0 + 2.0));
        assert_eq!(a.symmetric_difference_length(&IntervalSet::Empty), Some(2.0));
        assert_eq!(a.symmetric_difference_length(&IntervalSet::FullLine), None);
    }

    #[test]
    fn json_encodes_infinite_endpoints_as_strings() {
        let s = serde_json::to_string(&IntervalSet::LeftRay { hi: 2.5 }).unwrap();
        assert_eq!(s, r#"{"kind":"left_ray","lo":"-inf","hi":2.5}"#);
        let s = serde_json::to_string(&IntervalSet::FullLine).unwrap();
        assert_eq!(s, r#"{"kind":"full_line","lo":"-inf","hi":"inf"}"#);
        assert!(serde_json::from_str::<IntervalSet>(
            r#"{"kind":"two_rays","hi_left":-1,"lo_right":"1"}"#
        )
        .is_err());
        assert!(serde_json::from_str::<IntervalSet>(r#"{"kind":"bounded","lo":2,"hi":1}"#).is_err());
    }
}
