use crate::detection::{conditional_error_matrix, Measurement};
use crate::error::{Error, Result};
use crate::states::StateVectors;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rows may deviate from a probability distribution by this much before
/// they are rejected; within it they are clipped and renormalized.
pub const ROW_TOL: f64 = 1e-8;

/// Outcome distributions `P(j | s)` of a measurement, one row per
/// transmitted index.
#[derive(Debug, Clone)]
pub struct Channel {
    rows: Vec<Vec<f64>>,
    samplers: Vec<WeightedIndex<f64>>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(rows.len());
        let mut samplers = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL || row.iter().any(|&p| p < -ROW_TOL || !p.is_finite()) {
                return Err(Error::InvalidRow { row: i, sum });
            }
            let clipped: Vec<f64> = row.iter().map(|&p| p.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let row: Vec<f64> = clipped.iter().map(|p| p / total).collect();
            samplers.push(WeightedIndex::new(&row).map_err(|_| Error::InvalidRow { row: i, sum })?);
            clean.push(row);
        }
        Ok(Self { rows: clean, samplers })
    }

    pub fn from_measurement(m: &Measurement, states: &StateVectors) -> Result<Self> {
        Self::new(conditional_error_matrix(m, states)?)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, s: usize, j: usize) -> f64 {
        self.rows[s][j]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        self.samplers[s].sample(rng)
    }

    /// `1 − Σ_s ξ(s) P(s | s)`.
    pub fn error_probability(&self, prior: &[f64]) -> f64 {
        1.0 - prior.iter().enumerate().map(|(s, w)| w * self.rows[s][s]).sum::<f64>()
    }
}

/// Outcome of measuring state `s` with `m`, reproducible from `seed`.
pub fn measure(s: usize, m: &Measurement, states: &StateVectors, seed: u64) -> Result<usize> {
    if s >= states.count() {
        return Err(Error::SymbolOutOfRange {
            symbol: s,
            alphabet: states.count(),
        });
    }
    let channel = Channel::from_measurement(m, states)?;
    Ok(channel.sample(s, &mut ChaCha8Rng::seed_from_u64(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{bayes_solve, DetectionProblem, PriorDistribution, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use crate::states::{Amplitude, Constellation};

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(Channel::new(vec![vec![0.5, 0.4]]), Err(Error::InvalidRow { row: 0, .. })));
        assert!(Channel::new(vec![vec![1.0, 0.0], vec![1.1, -0.1]]).is_err());
        assert!(Channel::new(vec![vec![1.0 + 1e-12, -1e-12]]).is_ok());
    }

    #[test]
    fn projective_on_orthogonal_is_exact() {
        let sv = StateVectors::orthonormal(4);
        let m = Measurement::standard_basis(4);
        for s in 0..4 {
            for seed in 0..50 {
                assert_eq!(measure(s, &m, &sv, seed).unwrap(), s);
            }
        }
        assert!(measure(4, &m, &sv, 0).is_err());
    }

    #[test]
    fn identical_states_with_trivial_povm_are_uniform() {
        let sv = Constellation::custom(vec![Amplitude::new(0.5, 0.0); 3]).unwrap().state_vectors().unwrap();
        let ch = Channel::from_measurement(&Measurement::trivial(3, sv.dim()), &sv).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[ch.sample(1, &mut rng)] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn bpsk_helstrom_error_rate() {
        let sv = Constellation::build("psk", 2, 1.0, 0.0).unwrap().state_vectors().unwrap();
        let p = DetectionProblem::error_probability(sv.clone(), PriorDistribution::uniform(2)).unwrap();
        let sol = bayes_solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let ch = Channel::from_measurement(&sol.measurement, &sv).unwrap();
        let want = (1.0 - (1.0 - (-4.0f64).exp()).sqrt()) / 2.0;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let errors = (0..n).filter(|i| {
            let s = i % 2;
            ch.sample(s, &mut rng) != s
        }).count();
        let rate = errors as f64 / n as f64;
        let sigma = (want * (1.0 - want) / n as f64).sqrt();
        assert!((rate - want).abs() < 3.0 * sigma, "{rate} vs {want} ± {sigma}");
    }
}
