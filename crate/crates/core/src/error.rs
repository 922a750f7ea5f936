use thiserror::Error;

use crate::expr::ExprError;
use crate::manifold::Signature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("degenerate metric at {point:?}: {detail}")]
    DegenerateMetric { point: Vec<f64>, detail: String },
    #[error("signature mismatch at {point:?}: declared {expected}, found {found}")]
    SignatureMismatch {
        expected: Signature,
        found: Signature,
        point: Vec<f64>,
    },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("unsupported tensor valence ({upper},{lower})")]
    UnsupportedValence { upper: usize, lower: usize },
    #[error("point {point:?} lies outside the domain of chart `{chart}`")]
    OutOfDomain { chart: String, point: Vec<f64> },
    #[error("rank-deficient Jacobian at {point:?}")]
    RankDeficientJacobian { point: Vec<f64> },
    #[error("lightlike tangent direction at {point:?}: induced metric is degenerate")]
    LightlikeTangent { point: Vec<f64> },
    #[error("degenerate normal frame at {point:?}")]
    DegenerateNormalFrame { point: Vec<f64> },
    #[error("warping function is not positive at {point:?} (value {value})")]
    NonPositiveWarp { point: Vec<f64>, value: f64 },
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
