//! Error types shared by the family geometries.

use thiserror::Error;

/// Errors produced by family operations (steps, distances, oracles).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FamilyError {
    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty sample")]
    EmptySample,

    #[error("standard deviation must be positive, got {0}")]
    NonpositiveStd(f64),

    #[error("step size {0} outside (0, 1]")]
    StepOutOfRange(f64),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("copula mismatch: measures do not share a copula")]
    CopulaMismatch,

    #[error("generator mismatch: {left:?} vs {right:?}")]
    GeneratorMismatch { left: String, right: String },

    #[error("invalid population weights: {0}")]
    InvalidWeights(String),

    #[error("fixed-point iteration did not converge: residual {residual}")]
    FixedPointDidNotConverge { residual: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
}
