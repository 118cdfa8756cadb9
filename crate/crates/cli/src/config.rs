use crate::Failure;
use priorcipher::cipher::SessionConfig;
use priorcipher::detection::{CostMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use priorcipher::states::StateModel;
use serde::de::DeserializeOwned;
use serde::Deserialize;

fn one() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub states: StateModel,
    /// Uniform when omitted.
    pub prior: Option<Vec<f64>>,
    /// `cost[j][i]`; 0/1 when omitted.
    pub cost: Option<CostMatrix>,
    #[serde(default = "one")]
    pub transmittance: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxConfig {
    pub states: StateModel,
    pub cost: Option<CostMatrix>,
    #[serde(default = "one")]
    pub transmittance: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Length of the enumerated key space; the session's secret key must
    /// have this many bits.
    pub key_bits: usize,
    pub session: SessionConfig,
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, Failure> {
    toml::from_str(text).map_err(|e| Failure::Config(format!("config: {e}")))
}
