//! Error types shared across the crate.

use thiserror::Error;

/// All failure modes of tensor construction, tensor ops, losses, and training.
#[derive(Error, Debug)]
pub enum GridError {
    #[error("shape mismatch: {context}: {left} vs {right}")]
    ShapeMismatch {
        context: String,
        left: String,
        right: String,
    },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid axis set: {0}")]
    InvalidAxis(String),

    #[error("non-finite operand: {0}")]
    NonFiniteOperand(String),

    #[error("pool window {pool:?} larger than spatial dims {dims:?}")]
    PoolTooLarge {
        pool: (usize, usize),
        dims: (usize, usize),
    },

    #[error("mask size {mask} larger than spatial dims {dims:?}")]
    MaskTooLarge { mask: usize, dims: (usize, usize) },

    #[error("loss output is not a scalar (shape {0})")]
    NonScalarLoss(String),

    #[error("non-finite gradient for parameter node {0}")]
    NonFiniteGradient(usize),

    #[error("truth tensor is not binary: element {0} = {1}")]
    NonBinaryTruth(usize, f64),

    #[error("hard discretization cannot be used in a loss function")]
    HardModeAsLoss,

    #[error("class index {index} out of range for {num_classes} classes")]
    ClassOutOfRange { index: usize, num_classes: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("value out of range: {0}")]
    RangeViolation(String),

    #[error("y_true is missing the supplementary channel (need 2 channels, got {0})")]
    MissingSupplementChannel(usize),

    #[error("empty loss combination")]
    EmptyCombination,

    #[error("loss contains a gradient-blocked op ({0}); it can only be used as a metric")]
    GradientBlockedLoss(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    DivergenceDetected { epoch: usize, batch: usize },

    #[error("unknown loss or metric name: {0}")]
    UnknownLoss(String),

    #[error("missing parameter {param} for loss {loss}")]
    MissingParam { loss: String, param: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GridError>;

impl GridError {
    /// Machine-readable code used in CLI error objects.
    pub fn code(&self) -> &'static str {
        match self {
            GridError::ShapeMismatch { .. } => "SHAPE_MISMATCH",
            GridError::DomainError(_) => "DOMAIN_ERROR",
            GridError::InvalidAxis(_) => "INVALID_AXIS",
            GridError::NonFiniteOperand(_) => "NON_FINITE_OPERAND",
            GridError::PoolTooLarge { .. } => "POOL_TOO_LARGE",
            GridError::MaskTooLarge { .. } => "MASK_TOO_LARGE",
            GridError::NonScalarLoss(_) => "NON_SCALAR_LOSS",
            GridError::NonFiniteGradient(_) => "NON_FINITE_GRADIENT",
            GridError::NonBinaryTruth(_, _) => "NON_BINARY_TRUTH",
            GridError::HardModeAsLoss => "HARD_MODE_AS_LOSS",
            GridError::ClassOutOfRange { .. } => "CLASS_OUT_OF_RANGE",
            GridError::OutOfRange(_) => "OUT_OF_RANGE",
            GridError::RangeViolation(_) => "RANGE_VIOLATION",
            GridError::MissingSupplementChannel(_) => "MISSING_SUPPLEMENT_CHANNEL",
            GridError::EmptyCombination => "EMPTY_COMBINATION",
            GridError::GradientBlockedLoss(_) => "GRADIENT_BLOCKED_LOSS",
            GridError::DivergenceDetected { .. } => "DIVERGENCE_DETECTED",
            GridError::UnknownLoss(_) => "UNKNOWN_LOSS",
            GridError::MissingParam { .. } => "MISSING_PARAM",
            GridError::InvalidConfig(_) => "INVALID_CONFIG",
            GridError::Parse(_) => "PARSE_ERROR",
            GridError::Io(_) => "IO_ERROR",
        }
    }
}
