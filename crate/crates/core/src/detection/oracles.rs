//! Closed-form reference measurements.

use super::{Measurement, PriorDistribution};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::states::{StateVectors, RANK_CUTOFF};
use num_complex::Complex64;

/// Square-root measurement `Π_j = ρ̂^{-1/2} ξ_j ρ_j ρ̂^{-1/2}` with
/// `ρ̂ = Σ_i ξ_i ρ_i`, inverse taken on the support of `ρ̂`.
///
/// If the support of `ρ̂` is a proper subspace of the state span (some
/// weights are zero), the projector onto its complement is added to the
/// element of the likeliest state so that the result still resolves the
/// identity.
pub fn srm(states: &StateVectors, prior: &PriorDistribution) -> Result<Measurement> {
    if prior.len() != states.count() {
        return Err(Error::DimensionMismatch(format!(
            "{} states, {} prior weights",
            states.count(),
            prior.len()
        )));
    }
    let d = states.dim();
    let rho = states.densities();
    let mut avg = CMat::zeros(d, d);
    for (r, &w) in rho.iter().zip(prior.weights()) {
        avg += r * Complex64::new(w, 0.0);
    }
    if linalg::max_abs(&avg) == 0.0 {
        return Err(Error::EmptyProblem("average state is zero".into()));
    }
    let (inv_sqrt, support) = linalg::inv_sqrt_on_support(&avg, RANK_CUTOFF);
    let mut ops: Vec<CMat> = rho
        .iter()
        .zip(prior.weights())
        .map(|(r, &w)| &inv_sqrt * r * &inv_sqrt * Complex64::new(w, 0.0))
        .collect();
    let complement = linalg::identity(d) - support;
    if linalg::max_abs(&complement) > 0.5 {
        ops[prior.argmax()] += complement;
    }
    Measurement::new(ops)
}

/// Minimum error probability for two pure states:
/// `(1 − √(1 − 4 ξ₁ ξ₂ |⟨ψ₁|ψ₂⟩|²)) / 2`.
pub fn helstrom_binary(states: &StateVectors, prior: &PriorDistribution) -> Result<f64> {
    if states.count() != 2 || prior.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Helstrom bound needs exactly two states, got {}",
            states.count()
        )));
    }
    let s = states.vectors[0].dotc(&states.vectors[1]).norm();
    let (a, b) = (prior.weights()[0], prior.weights()[1]);
    let disc = (1.0 - 4.0 * a * b * s * s).max(0.0);
    Ok((1.0 - disc.sqrt()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{conditional_error_matrix, error_probability};
    use crate::states::{Amplitude, Constellation};

    fn bpsk() -> StateVectors {
        Constellation::build("psk", 2, 1.0, 0.0).unwrap().state_vectors().unwrap()
    }

    #[test]
    fn helstrom_examples() {
        let sv = StateVectors::orthonormal(2);
        for xi in [0.0, 0.3, 0.5] {
            let p = PriorDistribution::new(vec![xi, 1.0 - xi]).unwrap();
            assert_eq!(helstrom_binary(&sv, &p).unwrap(), 0.0);
        }
        let pe = helstrom_binary(&bpsk(), &PriorDistribution::uniform(2)).unwrap();
        let s = (-2.0f64).exp();
        assert!((pe - (1.0 - (1.0 - s * s).sqrt()) / 2.0).abs() < 1e-15);
        assert!((pe - 4.600e-3).abs() < 5e-7);
        assert_eq!(helstrom_binary(&bpsk(), &PriorDistribution::new(vec![1.0, 0.0]).unwrap()).unwrap(), 0.0);
        assert!(helstrom_binary(&StateVectors::orthonormal(3), &PriorDistribution::uniform(3)).is_err());
    }

    #[test]
    fn srm_single_state_is_identity() {
        let sv = Constellation::custom(vec![Amplitude::new(0.2, 0.1)]).unwrap().state_vectors().unwrap();
        let m = srm(&sv, &PriorDistribution::uniform(1)).unwrap();
        assert_eq!(m.dim(), 1);
        assert!((m.operators[0][(0, 0)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn srm_orthonormal_gives_projectors() {
        let sv = StateVectors::orthonormal(3);
        let m = srm(&sv, &PriorDistribution::uniform(3)).unwrap();
        let basis = Measurement::standard_basis(3);
        for (a, b) in m.operators.iter().zip(&basis.operators) {
            assert!(linalg::max_abs(&(a - b)) < 1e-14);
        }
    }

    #[test]
    fn srm_bpsk_equals_helstrom() {
        let sv = bpsk();
        let prior = PriorDistribution::uniform(2);
        let m = srm(&sv, &prior).unwrap();
        assert!(m.is_valid());
        let ch = conditional_error_matrix(&m, &sv).unwrap();
        let pe = error_probability(&ch, &prior);
        assert!((pe - helstrom_binary(&sv, &prior).unwrap()).abs() < 1e-10);
        // Helstrom POVM rows are symmetric at equal priors
        let want = 1.0 - 4.600e-3;
        assert!((ch[0][0] - want).abs() < 5e-7 && (ch[1][1] - want).abs() < 5e-7);
    }

    #[test]
    fn srm_completes_on_partial_support() {
        let sv = StateVectors::orthonormal(3);
        let m = srm(&sv, &PriorDistribution::new(vec![0.0, 0.4, 0.6]).unwrap()).unwrap();
        assert!(m.is_valid());
        assert!((m.operators[2][(0, 0)].re - 1.0).abs() < 1e-14);
    }
}
