use thiserror::Error;

use crate::params::Pair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be strictly positive, got {value}")]
    NonPositiveVolatility { name: &'static str, value: f64 },
    #[error("correlation must lie in [-1, 1], got {0}")]
    CorrelationOutOfRange(f64),
    #[error("{name} must be a positive exchange rate, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("client order size must be positive, got {0}")]
    NonPositiveOrderSize(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("pair {0}: zero temporary impact gives an unbounded trading speed")]
    FrictionlessPair(Pair),
    #[error("pair {pair}: zero terminal penalty with non-zero drift {drift} has no closed form")]
    ZeroPenaltyWithDrift { pair: Pair, drift: f64 },
    #[error("pair {pair}: solvability condition |mu| < alpha/a fails ({drift} vs {bound})")]
    Unsolvable { pair: Pair, drift: f64, bound: f64 },
    #[error("quadrature for {component} did not converge at t = {t} (last change {change:e})")]
    Quadrature { component: String, t: f64, change: f64 },
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: String, t: f64 },
    #[error("mark rate must be positive, got {0}")]
    NonPositiveMark(f64),
    #[error("TWAP limit undefined at t = T")]
    AtHorizon,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("path {path}: strategy returned non-finite speed for pair {pair} at step {step}")]
    NonFiniteSpeed { path: usize, step: usize, pair: Pair },
    #[error("invalid simulation setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A configuration value failed validation; `path` names the JSON field.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("paired comparison needs equal path counts ({0} vs {1})")]
    PathCountMismatch(usize, usize),
    #[error("trajectory grids differ between paths")]
    GridMismatch,
    #[error("{0}")]
    Invalid(String),
}
