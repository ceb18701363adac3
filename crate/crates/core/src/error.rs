use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("density argument must be nonnegative, got {0}")]
    NegativeDensity(f64),
    #[error("f has no positive zero when R0 = {r0} <= 1")]
    NoPositiveRoot { r0: f64 },
    #[error("no spreading: R0 = {r0} <= 1")]
    NoSpreading { r0: f64 },
    #[error("{0}: bisection did not converge")]
    Convergence(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("`{name}` out of range: {value} ({reason})")]
    OutOfRange { name: &'static str, value: f64, reason: &'static str },
    #[error("{0}: bisection did not converge")]
    Convergence(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid source: {0}")]
    Source(String),
    #[error("source support {which} lies within {margin} of the x-truncation boundary")]
    SourceNearBoundary { which: &'static str, margin: f64 },
    #[error("non-finite value at t = {t} in {field} node (i = {i}, j = {j})")]
    BlowUp { t: f64, field: &'static str, i: usize, j: usize },
    #[error("{0}")]
    Mode(String),
    #[error("invalid run option: {0}")]
    Options(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} samples in the fit window, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid trace: {0}")]
    Trace(String),
    #[error("excess over the limit is {0} on the fit window")]
    BadExcess(&'static str),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("steady state did not converge")]
    NotConverged,
    #[error("{0}")]
    Mode(String),
    #[error(transparent)]
    Pde(#[from] PdeError),
}
