use thiserror::Error;

use crate::atom::Series;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantum numbers: {0}")]
    InvalidState(String),

    #[error("series {0} is not present in the species table")]
    UnknownSeries(Series),

    #[error("dipole selection rule violated: {0}")]
    SelectionRule(String),

    #[error("field {field} V/cm is outside the perturbative regime [0, {max}] V/cm")]
    FieldOutOfRegime { field: f64, max: f64 },

    #[error("collective states do not form a valid pair transition: {0}")]
    InvalidPair(String),

    #[error("empty basis: {0}")]
    EmptyBasis(String),

    #[error("integration tolerance {requested:e} not met (estimated error {achieved:e})")]
    ToleranceNotMet { requested: f64, achieved: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("singular matrix in linear solve")]
    Singular,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("species data: {0}")]
    SpeciesData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
