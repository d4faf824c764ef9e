use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::Primitive;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("non-finite leaf value {0}")]
    NonFiniteInput(f64),
    #[error("{op}: operand {value} is outside the domain")]
    Domain { op: Primitive, value: f64 },
    #[error("operand belongs to a different graph")]
    ForeignOperand,
    #[error("{op}: wrong number of operands ({got})")]
    Arity { op: Primitive, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("{transform}: {detail}")]
    Domain { transform: &'static str, detail: String },
    #[error("invalid transform: {0}")]
    InvalidKind(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{distribution}: {detail}")]
pub struct DensityError {
    pub distribution: &'static str,
    pub detail: String,
}

impl DensityError {
    pub(crate) fn new(distribution: &'static str, detail: impl Into<String>) -> Self {
        DensityError {
            distribution,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("entry `{name}`: {detail}")]
    Shape { name: String, detail: String },
    #[error("missing entry `{0}`")]
    Missing(String),
    #[error("entry `{name}` has type {found}, expected {expected}")]
    Type {
        name: String,
        expected: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` needs dimension `{dim}`")]
    MissingDim { model: String, dim: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Why a log-joint evaluation could not be used.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalFailure {
    #[error("log density is not finite ({0})")]
    NonFinite(f64),
    #[error("gradient is not finite")]
    NonFiniteGradient,
    #[error(transparent)]
    Domain(#[from] AdError),
    #[error("{0}")]
    Model(String),
}

#[derive(Debug, Error)]
pub enum AdviError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation failed at iteration {iteration}: {reason}")]
    Evaluation {
        iteration: u64,
        reason: EvalFailure,
        mu: Vec<f64>,
        omega: Vec<f64>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {detail}")]
    Read { path: PathBuf, detail: String },
    #[error("cannot serialize manifest: {0}")]
    Json(#[from] serde_json::Error),
}
