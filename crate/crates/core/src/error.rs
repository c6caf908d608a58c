use thiserror::Error;

use crate::endo::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("point outside the blending region")]
    OutsideDomain,

    #[error("overlapping slices: {0} and {1}")]
    OverlappingSlices(usize, usize),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("family has the wrong role for this operation")]
    WrongRole,

    #[error("no determinant sign change on the segment")]
    NoSignChange,

    #[error("zero vector")]
    ZeroVector,

    #[error("interval division by an enclosure of zero")]
    DivisionByZero,

    #[error("memory guard: {cells} cells exceed the budget of {budget}")]
    MemoryGuard { cells: u128, budget: u128 },

    #[error("invalid parameters: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
