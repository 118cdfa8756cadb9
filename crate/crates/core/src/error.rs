use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown constellation label `{0}`")]
    UnknownLabel(String),
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),
    #[error("transmittance {0} outside [0, 1]")]
    InvalidTransmittance(f64),
    #[error("Gram matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("empty problem: {0}")]
    EmptyProblem(String),
    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
    #[error("measurement row {row} is not a probability distribution (sum {sum})")]
    InvalidRow { row: usize, sum: f64 },
    #[error("transcript does not match the attack model: {0}")]
    ModelMismatch(String),
    #[error("search failed: {0}")]
    Search(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
