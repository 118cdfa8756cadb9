//! Bayes and minimax quantum detection over a set of pure states.
//!
//! Costs follow the convention `C[j][i]`: the cost of deciding `j` when
//! state `i` was sent. Risk operators are `W_j = Σ_i ξ_i C_ji ρ_i`, and a
//! POVM is Bayes-optimal iff, with `Γ = Σ_j W_j Π_j`,
//!
//! * `(W_j − Γ) Π_j = 0` for all `j`,
//! * `Π_j (W_i − W_j) Π_i = 0` for all `i, j`,
//! * `W_j − Γ ⪰ 0` for all `j`.
//!
//! [`bayes_solve`] and [`minimax_solve`] both go through the block SDP solver
//! in [`crate::sdp`]; the residuals above are the certificate of record.

mod bayes;
mod minimax;
mod oracles;
mod polish;

pub use bayes::{bayes_solve, check_bayes_optimality, BayesSolution, OptimalityReport};
pub use minimax::{
    check_minimax_optimality, grid_maximize, minimax_solve, MinimaxReport, MinimaxSolution,
    SUPPORT_THRESHOLD,
};
pub use oracles::{helstrom_binary, srm};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::states::StateVectors;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default residual tolerance for certification.
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Maximum entrywise deviation of `Σ_j Π_j` from the identity.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Minimum eigenvalue allowed for a POVM element.
pub const POSITIVITY_TOL: f64 = 1e-10;
const PRIOR_SUM_TOL: f64 = 1e-12;

/// A priori probabilities `ξ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorDistribution {
    weights: Vec<f64>,
}

impl PriorDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPrior("empty prior".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPrior(format!("weights must be finite and non-negative: {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidPrior(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPrior(format!("cannot normalize {weights:?}")));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Index of the largest weight; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for PriorDistribution {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<PriorDistribution> for Vec<f64> {
    fn from(p: PriorDistribution) -> Self {
        p.weights
    }
}

/// `C[j][i]`, the cost of deciding `j` when `i` is true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CostMatrix {
    entries: Vec<Vec<f64>>,
}

impl CostMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let m = entries.len();
        if m == 0 || entries.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidCost("cost matrix must be square and non-empty".into()));
        }
        if entries.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCost("cost entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    /// 0/1 cost: the Bayes risk is the average error probability.
    pub fn error_probability(m: usize) -> Self {
        Self {
            entries: (0..m)
                .map(|j| (0..m).map(|i| if i == j { 0.0 } else { 1.0 }).collect())
                .collect(),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            entries: vec![vec![0.0; m]; m],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `C_ji`.
    pub fn get(&self, decided: usize, truth: usize) -> f64 {
        self.entries[decided][truth]
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<Vec<f64>>> for CostMatrix {
    type Error = Error;

    fn try_from(entries: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<CostMatrix> for Vec<Vec<f64>> {
    fn from(c: CostMatrix) -> Self {
        c.entries
    }
}

#[derive(Debug, Clone)]
pub struct DetectionProblem {
    pub states: StateVectors,
    pub prior: PriorDistribution,
    pub cost: CostMatrix,
}

impl DetectionProblem {
    pub fn new(states: StateVectors, prior: PriorDistribution, cost: CostMatrix) -> Result<Self> {
        let m = states.count();
        if prior.len() != m || cost.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} states, {} prior weights, {}x{} costs",
                prior.len(),
                cost.len(),
                cost.len()
            )));
        }
        Ok(Self { states, prior, cost })
    }

    /// Error-probability criterion (0/1 costs).
    pub fn error_probability(states: StateVectors, prior: PriorDistribution) -> Result<Self> {
        let m = states.count();
        Self::new(states, prior, CostMatrix::error_probability(m))
    }

    pub fn m(&self) -> usize {
        self.states.count()
    }

    pub fn dim(&self) -> usize {
        self.states.dim()
    }
}

/// `W_j = Σ_i ξ_i C_ji ρ_i`.
pub fn risk_operators(p: &DetectionProblem) -> Vec<CMat> {
    let m = p.m();
    let d = p.dim();
    let rho = p.states.densities();
    (0..m)
        .map(|j| {
            let mut w = CMat::zeros(d, d);
            for (i, r) in rho.iter().enumerate() {
                let c = p.prior.weights()[i] * p.cost.get(j, i);
                if c != 0.0 {
                    w += r * Complex64::new(c, 0.0);
                }
            }
            linalg::hermitian_part(&w)
        })
        .collect()
}

/// A POVM `{Π_j}` together with its completeness and positivity residuals.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub operators: Vec<CMat>,
    /// `max_abs(Σ_j Π_j − I)`.
    pub completeness_residual: f64,
    /// `max(0, −min_j λ_min(Π_j))`.
    pub positivity_residual: f64,
}

impl Measurement {
    pub fn new(operators: Vec<CMat>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::EmptyProblem("a POVM needs at least one element".into()));
        };
        let d = first.nrows();
        if operators.iter().any(|o| o.nrows() != d || o.ncols() != d) {
            return Err(Error::DimensionMismatch("POVM elements must share one square shape".into()));
        }
        let operators: Vec<CMat> = operators.iter().map(linalg::hermitian_part).collect();
        let mut sum = CMat::zeros(d, d);
        for o in &operators {
            sum += o;
        }
        let completeness_residual = linalg::max_abs(&(sum - linalg::identity(d)));
        let positivity_residual = operators
            .iter()
            .map(|o| -linalg::min_eigenvalue(o))
            .fold(0.0, f64::max);
        Ok(Self {
            operators,
            completeness_residual,
            positivity_residual,
        })
    }

    /// Builds a POVM from positive definite `X_j` whose sum is close to the
    /// identity, restoring completeness exactly by the congruence
    /// `Π_j = S^{-1/2} X_j S^{-1/2}` with `S = Σ_j X_j`.
    pub fn from_near_complete(operators: &[CMat]) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::EmptyProblem("a POVM needs at least one element".into()));
        };
        let d = first.nrows();
        let mut sum = CMat::zeros(d, d);
        for o in operators {
            sum += o;
        }
        let s = linalg::spectral_map(&sum, |l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 });
        Self::new(operators.iter().map(|o| &s * o * &s).collect())
    }

    /// Projective measurement in the standard basis of dimension `m`.
    pub fn standard_basis(m: usize) -> Self {
        let ops = (0..m)
            .map(|j| CMat::from_fn(m, m, |r, c| if r == j && c == j { linalg::ONE } else { linalg::ZERO }))
            .collect();
        Self::new(ops).expect("basis projectors form a POVM")
    }

    /// `Π_j = I / M` in dimension `d`.
    pub fn trivial(m: usize, d: usize) -> Self {
        let ops = (0..m)
            .map(|_| linalg::identity(d) * Complex64::new(1.0 / m as f64, 0.0))
            .collect();
        Self::new(ops).expect("uniform split forms a POVM")
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators.first().map_or(0, |o| o.nrows())
    }

    pub fn is_valid(&self) -> bool {
        self.completeness_residual <= COMPLETENESS_TOL && self.positivity_residual <= POSITIVITY_TOL
    }

    /// Operator entries as `[re, im]` pairs, for audit export.
    pub fn to_entry_lists(&self) -> Vec<Vec<Vec<[f64; 2]>>> {
        self.operators
            .iter()
            .map(|o| {
                (0..o.nrows())
                    .map(|r| (0..o.ncols()).map(|c| [o[(r, c)].re, o[(r, c)].im]).collect())
                    .collect()
            })
            .collect()
    }
}

/// `P(j|i) = Tr ρ_i Π_j`; row `i` is the true state.
pub fn conditional_error_matrix(m: &Measurement, states: &StateVectors) -> Result<Vec<Vec<f64>>> {
    if m.dim() != states.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVM acts in dimension {}, states live in {}",
            m.dim(),
            states.dim()
        )));
    }
    Ok(states
        .vectors
        .iter()
        .map(|v| m.operators.iter().map(|op| linalg::expectation(op, v)).collect())
        .collect())
}

/// Conditional risk `r_i = Σ_j C_ji P(j|i)` of each true state.
pub fn conditional_risks(channel: &[Vec<f64>], cost: &CostMatrix) -> Vec<f64> {
    channel
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, p)| cost.get(j, i) * p).sum())
        .collect()
}

/// `1 − Σ_i ξ_i P(i|i)`.
pub fn error_probability(channel: &[Vec<f64>], prior: &PriorDistribution) -> f64 {
    1.0 - channel
        .iter()
        .zip(prior.weights())
        .enumerate()
        .map(|(i, (row, w))| w * row[i])
        .sum::<f64>()
}

/// Hermitian basis of `d × d` matrices, orthonormal under `Re Tr(A B)`.
/// Diagonal units come first.
pub(crate) fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(d * d);
    for a in 0..d {
        let mut e = CMat::zeros(d, d);
        e[(a, a)] = linalg::ONE;
        basis.push(e);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..d {
        for b in a + 1..d {
            let mut e = CMat::zeros(d, d);
            e[(a, b)] = Complex64::new(r, 0.0);
            e[(b, a)] = Complex64::new(r, 0.0);
            basis.push(e);
            let mut f = CMat::zeros(d, d);
            f[(a, b)] = Complex64::new(0.0, r);
            f[(b, a)] = Complex64::new(0.0, -r);
            basis.push(f);
        }
    }
    basis
}

/// `Σ_k y_k E_k` over [`hermitian_basis`].
pub(crate) fn hermitian_combination(d: usize, y: &[f64]) -> CMat {
    hermitian_basis(d)
        .iter()
        .zip(y)
        .fold(CMat::zeros(d, d), |acc, (e, &c)| acc + e * Complex64::new(c, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::Constellation;

    fn bpsk(prior: Vec<f64>) -> DetectionProblem {
        let sv = Constellation::build("psk", 2, 1.0, 0.0).unwrap().state_vectors().unwrap();
        DetectionProblem::error_probability(sv, PriorDistribution::new(prior).unwrap()).unwrap()
    }

    #[test]
    fn prior_validation() {
        assert!(PriorDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(PriorDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(PriorDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(PriorDistribution::new(vec![]).is_err());
        let p = PriorDistribution::normalized(vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.weights(), &[0.5, 0.25, 0.25]);
        assert_eq!(PriorDistribution::new(vec![0.4, 0.4, 0.2]).unwrap().argmax(), 0);
    }

    #[test]
    fn risk_operators_binary_default_cost() {
        let p = bpsk(vec![0.3, 0.7]);
        let w = risk_operators(&p);
        let rho = p.states.densities();
        assert!(linalg::max_abs(&(&w[0] - &rho[1] * Complex64::new(0.7, 0.0))) < 1e-15);
        assert!(linalg::max_abs(&(&w[1] - &rho[0] * Complex64::new(0.3, 0.0))) < 1e-15);
    }

    #[test]
    fn risk_operators_zero_cost() {
        let p = bpsk(vec![0.5, 0.5]);
        let p = DetectionProblem::new(p.states, p.prior, CostMatrix::zeros(2)).unwrap();
        assert!(risk_operators(&p).iter().all(|w| linalg::max_abs(w) == 0.0));
    }

    #[test]
    fn risk_operator_traces() {
        let sv = Constellation::build("psk-asym", 4, 0.8, 0.3).unwrap().state_vectors().unwrap();
        let prior = PriorDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = DetectionProblem::error_probability(sv, prior.clone()).unwrap();
        for (j, w) in risk_operators(&p).iter().enumerate() {
            let tr: f64 = (0..w.nrows()).map(|k| w[(k, k)].re).sum();
            assert!((tr - (1.0 - prior.weights()[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_matrix_examples() {
        let sv = StateVectors::orthonormal(3);
        let ch = conditional_error_matrix(&Measurement::standard_basis(3), &sv).unwrap();
        for (i, row) in ch.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let same = Constellation::custom(vec![crate::states::Amplitude::new(0.4, 0.1); 3])
            .unwrap()
            .state_vectors()
            .unwrap();
        let ch = conditional_error_matrix(&Measurement::trivial(3, same.dim()), &same).unwrap();
        for row in &ch {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().zip(&ch[0]).all(|(a, b)| (a - b).abs() < 1e-14));
        }
        assert!(conditional_error_matrix(&Measurement::trivial(3, 2), &sv).is_err());
    }

    #[test]
    fn measurement_residuals() {
        let m = Measurement::trivial(4, 3);
        assert!(m.is_valid());
        let bad = Measurement::new(vec![linalg::identity(2), linalg::identity(2)]).unwrap();
        assert!((bad.completeness_residual - 1.0).abs() < 1e-15);
        let neg = Measurement::new(vec![
            linalg::identity(1) * Complex64::new(1.5, 0.0),
            linalg::identity(1) * Complex64::new(-0.5, 0.0),
        ])
        .unwrap();
        assert!((neg.positivity_residual - 0.5).abs() < 1e-15);
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = hermitian_basis(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            assert!(linalg::max_abs(&(x - x.adjoint())) < 1e-15);
            for (j, y) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((linalg::trace_product(x, y) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cost_serde() {
        let c: CostMatrix = serde_json::from_str("[[0,1],[1,0]]").unwrap();
        assert_eq!(c, CostMatrix::error_probability(2));
        assert!(serde_json::from_str::<CostMatrix>("[[0,1]]").is_err());
        assert!(serde_json::from_str::<PriorDistribution>("[0.2,0.2]").is_err());
    }
}
