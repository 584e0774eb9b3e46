use thiserror::Error;

use crate::verifier::Violation;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),

    #[error("no anchor point before the region ends")]
    Exhausted,

    #[error("construction produced {} violation(s), first: {:?}", .0.len(), .0.first())]
    ConstructionBug(Vec<Violation>),

    #[error("layout has not been verified")]
    Unverified,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PackError>;
