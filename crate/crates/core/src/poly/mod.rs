//! Exact sparse multivariate polynomials over ℚ or ℚ(√d).

mod monomial;
mod multipoly;
mod parse;
mod scalar;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use monomial::Monomial;
pub use multipoly::{FloatPoly, HomogeneousDecomposition, MultiPoly};
pub use parse::{parse_poly, parse_scalar, ParseError};
pub use scalar::{join_ext, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("variable count mismatch: {left} vs {right}")]
    VarCountMismatch { left: usize, right: usize },
    #[error("field extension mismatch: sqrt({left}) vs sqrt({right})")]
    ExtensionMismatch { left: u64, right: u64 },
    #[error("variable index {index} out of range for {nvars} variables")]
    VarIndexOutOfRange { index: usize, nvars: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Total degree with `∞` for the zero polynomial. Serialized as an integer or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "DegreeRepr", into = "DegreeRepr")]
pub enum Degree {
    Finite(u32),
    Infinite,
}

impl Degree {
    pub fn finite(self) -> Option<u32> {
        match self {
            Degree::Finite(d) => Some(d),
            Degree::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Degree::Infinite
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DegreeRepr {
    Finite(u32),
    Text(String),
}

impl From<Degree> for DegreeRepr {
    fn from(d: Degree) -> Self {
        match d {
            Degree::Finite(n) => DegreeRepr::Finite(n),
            Degree::Infinite => DegreeRepr::Text("inf".into()),
        }
    }
}

impl TryFrom<DegreeRepr> for Degree {
    type Error = String;

    fn try_from(r: DegreeRepr) -> Result<Self, Self::Error> {
        match r {
            DegreeRepr::Finite(n) => Ok(Degree::Finite(n)),
            DegreeRepr::Text(s) if s == "inf" => Ok(Degree::Infinite),
            DegreeRepr::Text(s) => Err(format!("invalid degree '{s}'")),
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::Finite(d) => write!(f, "{d}"),
            Degree::Infinite => write!(f, "inf"),
        }
    }
}
