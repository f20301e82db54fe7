use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} values, grid expects {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("tensor at node {0} is not positive definite")]
    NotPositiveDefinite(usize),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("curve self-intersects (segments {first} and {second})")]
    SelfIntersecting { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric is not positive definite at node {node}: <w, M^-1 w> = {value}")]
    NotPositiveDefinite { node: usize, value: f64 },
    #[error("invalid metric parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EikonalError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("seed {0:?} lies outside the grid")]
    SeedOutsideGrid(Vec<f64>),
    #[error("metric evaluation is not finite at node {0}")]
    NonFiniteMetric(usize),
    #[error("stencil and domain dimensions disagree")]
    StencilMismatch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("target has no finite geodesic distance")]
    UnreachedTarget,
    #[error("descent stalled near {last:?}")]
    StuckDescent { last: Vec<f64> },
    #[error("backtracking exceeded {0} steps")]
    MaxStepsExceeded(usize),
    #[error("point {0:?} lies outside the grid")]
    OutsideGrid(Vec<f64>),
    #[error("invalid trace configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eikonal(#[from] EikonalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("region mask has an empty side")]
    DegenerateRegion,
    #[error("conjugate gradient did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("geodesic for segment {segment} failed: {reason}")]
    SegmentTraceFailed { segment: usize, reason: String },
    #[error("invalid evolution parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Any failure raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Eikonal(#[from] EikonalError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
