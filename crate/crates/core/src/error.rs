use thiserror::Error;

use crate::superquadric::Superquadric;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum So3Error {
    #[error("matrix is not a rotation (orthonormality defect {defect:.3e}, det {det})")]
    NotARotation { defect: f64, det: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not skew-symmetric (symmetric part norm {0:.3e})")]
    NotSkew(f64),
    #[error("ZYX Euler angles undefined at gimbal lock (r31 = {0})")]
    GimbalLock(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid superquadric parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("radial displacement is singular at the superquadric origin (|p| = {0:.3e})")]
    Singularity(f64),
    #[error("superquadric fit did not converge: {reason}")]
    NonConvergence {
        reason: String,
        best: Superquadric,
        cost: f64,
    },
    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("point cloud line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("point cloud io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("vision measurement required when k_p > 0")]
    MissingVision,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Rotation(#[from] So3Error),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

impl From<GeometryError> for SimError {
    fn from(e: GeometryError) -> Self {
        SimError::Filter(FilterError::Geometry(e))
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("trajectory csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trajectory io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory row {row}: {message}")]
    Corrupt { row: usize, message: String },
}
