//! Exact polynomial, jet and spherical-series algebra.

pub mod jet;
pub mod poly;
pub mod spherical;

pub use jet::{Jet, JetOp};
pub use poly::{rat, rat_int, rat_to_f64, Monomial, MultiPoly, Rational, TermJson};
pub use spherical::{radial_laplacian_term, SeriesOp, SphericalSeries, SphericalTerm};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exponent {0} too large")]
    ExponentTooLarge(u32),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("jet truncation order exhausted")]
    OrderExhausted,
    #[error("constant term must be 1, found {0}")]
    NotUnit(String),
    #[error("series is not invertible: {0}")]
    NotInvertible(String),
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
}
