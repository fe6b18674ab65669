//! Extended reals: a finite number or one of the two infinities.
//!
//! The asymptotic quantities of a density (the limiting slope, the limiting
//! doubling defect, the blowup time) may legitimately be infinite, so they are
//! carried in this type rather than as raw `f64` infinities. Indeterminate
//! forms (`∞ − ∞`, `0 · ∞`) are reported as errors instead of producing NaN.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInf,
    NegInf,
}

impl ExtendedReal {
    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self::Finite(value))
        } else {
            Err(Error::Indeterminate(format!("{value} is not a finite real")))
        }
    }

    /// Maps IEEE infinities onto the matching variant; NaN is rejected.
    pub fn from_f64(value: f64) -> Result<Self> {
        if value.is_nan() {
            Err(Error::Indeterminate("NaN has no extended-real value".into()))
        } else if value == f64::INFINITY {
            Ok(Self::PosInf)
        } else if value == f64::NEG_INFINITY {
            Ok(Self::NegInf)
        } else {
            Ok(Self::Finite(value))
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::PosInf => f64::INFINITY,
            Self::NegInf => f64::NEG_INFINITY,
        }
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn is_pos_inf(self) -> bool {
        matches!(self, Self::PosInf)
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self> {
        use ExtendedReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => {
                Err(Error::Indeterminate("∞ − ∞".into()))
            }
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self> {
        self.checked_add(-rhs)
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self> {
        use ExtendedReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Ok(Finite(a * b)),
            (Finite(a), inf) | (inf, Finite(a)) => {
                if a == 0.0 {
                    Err(Error::Indeterminate("0 · ∞".into()))
                } else if (a > 0.0) == inf.is_pos_inf() {
                    Ok(PosInf)
                } else {
                    Ok(NegInf)
                }
            }
            (a, b) => {
                if a == b {
                    Ok(PosInf)
                } else {
                    Ok(NegInf)
                }
            }
        }
    }
}

impl std::ops::Neg for ExtendedReal {
    type Output = Self;

    fn neg(self) -> Self {
        match self {
            Self::Finite(v) => Self::Finite(-v),
            Self::PosInf => Self::NegInf,
            Self::NegInf => Self::PosInf,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl From<f64> for ExtendedReal {
    /// Panics on NaN.
    fn from(value: f64) -> Self {
        Self::from_f64(value).expect("NaN is not an extended real")
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::PosInf => f.write_str("inf"),
            Self::NegInf => f.write_str("-inf"),
        }
    }
}

impl FromStr for ExtendedReal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" | "∞" => Ok(Self::PosInf),
            "-inf" | "-infinity" | "-∞" => Ok(Self::NegInf),
            _ => t
                .parse::<f64>()
                .map_err(|_| Error::Definition(format!("`{t}` is not a number or inf")))
                .and_then(Self::from_f64),
        }
    }
}

/// Finite values serialize as JSON numbers, infinities as the strings
/// `"inf"` / `"-inf"`.
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => serializer.serialize_f64(*v),
            Self::PosInf => serializer.serialize_str("inf"),
            Self::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Self::from_f64(v).map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
