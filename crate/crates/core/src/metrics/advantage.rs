use crate::cipher::Channel;
use crate::detection::{
    bayes_solve, minimax_solve, CostMatrix, DetectionProblem, MinimaxSolution, PriorDistribution,
    DEFAULT_MAX_ITER,
};
use crate::error::{Error, Result};
use crate::states::{Constellation, StateVectors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

/// Bayes errors at or below this count as zero, and the ratio is reported
/// as infinite.
pub const ZERO_ERROR: f64 = 1e-12;

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvantageReport {
    /// Error of the Bayes POVM for `prior`.
    pub pe_bayes: f64,
    /// Error at `prior` of the minimax POVM.
    pub pe_minimax: f64,
    /// `pe_minimax / pe_bayes`; `f64::INFINITY` when `pe_bayes` is zero.
    #[serde(serialize_with = "finite_or_inf")]
    pub ratio: f64,
    pub prior: Vec<f64>,
}

fn ratio(pe_minimax: f64, pe_bayes: f64) -> f64 {
    if pe_bayes <= ZERO_ERROR {
        f64::INFINITY
    } else {
        pe_minimax / pe_bayes
    }
}

fn minimax_channel(states: &StateVectors, tol: f64) -> Result<(MinimaxSolution, Channel)> {
    let sol = minimax_solve(states, &CostMatrix::error_probability(states.count()), tol)?;
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            residual: sol.equal_error_spread.max(sol.bayes_residual),
        });
    }
    let channel = Channel::from_measurement(&sol.measurement, states)?;
    Ok((sol, channel))
}

/// [`advantage_ratio`] with the minimax channel already solved.
pub fn advantage_with(minimax: &Channel, states: &StateVectors, prior: &PriorDistribution, tol: f64) -> Result<AdvantageReport> {
    let p = DetectionProblem::error_probability(states.clone(), prior.clone())?;
    let sol = bayes_solve(&p, tol, DEFAULT_MAX_ITER)?;
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            residual: sol.optimality_residual,
        });
    }
    let pe_minimax = minimax.error_probability(prior.weights()).max(0.0);
    let pe_bayes = sol.error_probability;
    Ok(AdvantageReport {
        pe_bayes,
        pe_minimax,
        ratio: ratio(pe_minimax, pe_bayes),
        prior: prior.weights().to_vec(),
    })
}

/// Error of the minimax POVM over the Bayes error, both at the true prior.
pub fn advantage_ratio(states: &StateVectors, prior: &PriorDistribution, tol: f64) -> Result<AdvantageReport> {
    if prior.len() != states.count() {
        return Err(Error::DimensionMismatch(format!(
            "{} states, {} prior weights",
            states.count(),
            prior.len()
        )));
    }
    let (_, channel) = minimax_channel(states, tol)?;
    advantage_with(&channel, states, prior, tol)
}

fn default_thetas() -> Vec<f64> {
    vec![0.0]
}

fn default_min_weight() -> f64 {
    0.02
}

fn default_tol() -> f64 {
    crate::detection::DEFAULT_TOL
}

/// A parameterized family of state sets and a prior-search budget.
///
/// The family is every combination of `mean_photons` and `thetas`. For
/// `psk-asym`, `theta = 0` is the symmetric set. `budget` counts Bayes
/// evaluations per state set, the first being the uniform prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSearchConfig {
    pub kind: String,
    pub m: usize,
    pub mean_photons: Vec<f64>,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    pub budget: usize,
    /// Lower bound on every prior weight. The ratio is unbounded near the
    /// vertices of the simplex, so the search needs a floor.
    #[serde(default = "default_min_weight")]
    pub min_weight: f64,
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchPhase {
    Seed,
    Random,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub mean_photon: f64,
    pub theta: f64,
    pub phase: SearchPhase,
    #[serde(flatten)]
    pub report: AdvantageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaSearchResult {
    /// Largest finite ratio found.
    pub best: SurfacePoint,
    /// Every evaluated point, in evaluation order.
    pub surface: Vec<SurfacePoint>,
}

fn family_member(cfg: &EtaSearchConfig, mean_photon: f64, theta: f64) -> Result<Constellation> {
    if cfg.kind == "psk-asym" && theta == 0.0 {
        Constellation::build("psk", cfg.m, mean_photon, 0.0)
    } else {
        Constellation::build(&cfg.kind, cfg.m, mean_photon, theta)
    }
}

/// Random point of the floored simplex `{ξ : ξ_i ≥ f, Σ ξ_i = 1}`.
fn random_prior(rng: &mut ChaCha8Rng, m: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let free = 1.0 - m as f64 * floor;
    e.iter().map(|v| floor + free * v / total).collect()
}

/// Maximizes the advantage ratio over priors (and the family parameters).
///
/// Per state set: the uniform prior, then half the remaining budget on
/// random floored-simplex points, then a pairwise mass-transfer local
/// search from the best point with an adaptive step. Deterministic given
/// `seed`; state set `i` draws from ChaCha8 stream `i`.
pub fn eta_search(cfg: &EtaSearchConfig) -> Result<EtaSearchResult> {
    let m = cfg.m;
    if cfg.budget == 0 {
        return Err(Error::InvalidConfig("search budget must be positive".into()));
    }
    if cfg.mean_photons.is_empty() || cfg.thetas.is_empty() {
        return Err(Error::InvalidConfig("empty parameter sweep".into()));
    }
    if m == 0 || !(0.0..1.0 / m as f64).contains(&cfg.min_weight) && !(m == 1 && cfg.min_weight == 0.0) {
        return Err(Error::InvalidConfig(format!(
            "min_weight must lie in [0, 1/M), got {}",
            cfg.min_weight
        )));
    }
    let floor = cfg.min_weight;
    let mut surface = Vec::new();
    let mut set_index = 0u64;
    for &n in &cfg.mean_photons {
        for &theta in &cfg.thetas {
            let states = family_member(cfg, n, theta)?.state_vectors()?;
            let (_, channel) = minimax_channel(&states, cfg.tol)?;
            let eval = |w: Vec<f64>| -> Result<AdvantageReport> {
                advantage_with(&channel, &states, &PriorDistribution::normalized(w)?, cfg.tol)
            };
            let point = |report, phase| SurfacePoint {
                mean_photon: n,
                theta,
                phase,
                report,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(set_index);
            set_index += 1;

            let seed = eval(vec![1.0 / m as f64; m])?;
            let mut best = seed.clone();
            surface.push(point(seed, SearchPhase::Seed));
            let n_random = (cfg.budget - 1) / 2;
            let candidates: Vec<Vec<f64>> = (0..n_random).map(|_| random_prior(&mut rng, m, floor)).collect();
            let reports: Vec<AdvantageReport> = candidates.into_par_iter().map(eval).collect::<Result<_>>()?;
            for r in reports {
                if better(&r, &best) {
                    best = r.clone();
                }
                surface.push(point(r, SearchPhase::Random));
            }
            let mut step = 0.25 * (1.0 - m as f64 * floor);
            for _ in 0..cfg.budget - 1 - n_random {
                if m < 2 {
                    break;
                }
                let i = rng.random_range(0..m);
                let j = (i + rng.random_range(1..m)) % m;
                let delta = step * (2.0 * rng.random::<f64>() - 1.0);
                let mut w = best.prior.clone();
                w[i] += delta;
                w[j] -= delta;
                if w[i] < floor || w[j] < floor {
                    w[i] = w[i].max(floor);
                    w[j] = w[j].max(floor);
                    let total: f64 = w.iter().sum();
                    let excess = total - 1.0;
                    let k = if w[i] - excess >= floor { i } else { j };
                    w[k] -= excess;
                    if w[k] < floor {
                        step *= 0.7;
                        continue;
                    }
                }
                let r = eval(w)?;
                if better(&r, &best) {
                    best = r.clone();
                    step = (step * 1.2).min(0.5);
                } else {
                    step *= 0.7;
                }
                surface.push(point(r, SearchPhase::Refine));
            }
        }
    }
    let best = surface
        .iter()
        .filter(|p| p.report.ratio.is_finite())
        .fold(None::<&SurfacePoint>, |acc, p| match acc {
            Some(b) if b.report.ratio >= p.report.ratio => Some(b),
            _ => Some(p),
        })
        .cloned()
        .ok_or_else(|| Error::Search("every evaluated prior has zero Bayes error; the ratio is undefined".into()))?;
    Ok(EtaSearchResult { best, surface })
}

fn better(a: &AdvantageReport, b: &AdvantageReport) -> bool {
    a.ratio.is_finite() && (!b.ratio.is_finite() || a.ratio > b.ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::helstrom_binary;

    fn psk(m: usize, n: f64) -> StateVectors {
        Constellation::build("psk", m, n, 0.0).unwrap().state_vectors().unwrap()
    }

    fn search(kind: &str, m: usize, budget: usize) -> EtaSearchConfig {
        EtaSearchConfig {
            kind: kind.into(),
            m,
            mean_photons: vec![1.0],
            thetas: vec![0.0],
            budget,
            min_weight: 0.05,
            seed: 9,
            tol: 1e-7,
        }
    }

    #[test]
    fn symmetric_uniform_ratio_is_one() {
        let r = advantage_ratio(&psk(3, 1.0), &PriorDistribution::uniform(3), 1e-7).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn orthogonal_states_give_sentinel() {
        let r = advantage_ratio(&StateVectors::orthonormal(3), &PriorDistribution::new(vec![0.2, 0.3, 0.5]).unwrap(), 1e-7).unwrap();
        assert!(r.pe_bayes.abs() < 1e-12 && r.pe_minimax.abs() < 1e-12);
        assert_eq!(r.ratio, f64::INFINITY);
        assert!(serde_json::to_string(&r).unwrap().contains("\"ratio\":\"inf\""));
    }

    #[test]
    fn skewed_prior_gives_large_ratio() {
        let r = advantage_ratio(&psk(3, 1.0), &PriorDistribution::new(vec![0.9, 0.05, 0.05]).unwrap(), 1e-7).unwrap();
        assert!(r.ratio > 2.0, "{r:?}");
    }

    #[test]
    fn ratio_never_below_one() {
        let states = Constellation::build("psk-asym", 3, 0.8, 0.4).unwrap().state_vectors().unwrap();
        let (_, ch) = minimax_channel(&states, 1e-7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let w = random_prior(&mut rng, 3, 0.0);
            let r = advantage_with(&ch, &states, &PriorDistribution::normalized(w).unwrap(), 1e-7).unwrap();
            assert!(r.ratio >= 1.0 - 1e-8, "{r:?}");
        }
    }

    #[test]
    fn budget_one_is_the_seed_point() {
        let res = eta_search(&search("psk", 3, 1)).unwrap();
        assert_eq!(res.surface.len(), 1);
        assert_eq!(res.best.phase, SearchPhase::Seed);
        assert_eq!(res.best.report.prior, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn bpsk_search_matches_grid_oracle() {
        let cfg = search("psk", 2, 41);
        let res = eta_search(&cfg).unwrap();
        // symmetric BPSK: minimax is Helstrom at ½, so the ratio is closed form
        let states = psk(2, 1.0);
        let pe_mm = helstrom_binary(&states, &PriorDistribution::uniform(2)).unwrap();
        let mut grid_best = (0.0, 0.0);
        for k in 0..=1000 {
            let xi = cfg.min_weight + (1.0 - 2.0 * cfg.min_weight) * k as f64 / 1000.0;
            let pe = helstrom_binary(&states, &PriorDistribution::new(vec![xi, 1.0 - xi]).unwrap()).unwrap();
            if pe_mm / pe > grid_best.0 {
                grid_best = (pe_mm / pe, xi);
            }
        }
        let best = &res.best.report;
        assert!((best.ratio - grid_best.0).abs() < 1e-6 * grid_best.0, "{} vs {:?}", best.ratio, grid_best);
        assert!((best.prior[0] - grid_best.1).abs() < 1e-6 || (best.prior[1] - grid_best.1).abs() < 1e-6);
        assert!(best.prior[0] != 0.5);
    }

    #[test]
    fn theta_sweep_rows() {
        let mut cfg = search("psk-asym", 3, 3);
        cfg.thetas = vec![0.0, 0.4];
        let res = eta_search(&cfg).unwrap();
        assert_eq!(res.surface.len(), 6);
        assert_eq!(res.surface[3].theta, 0.4);
        assert_eq!(eta_search(&cfg).unwrap(), res);
    }

    #[test]
    fn search_errors() {
        let mut cfg = search("psk", 3, 0);
        assert!(eta_search(&cfg).is_err());
        cfg.budget = 5;
        cfg.min_weight = 0.4;
        assert!(eta_search(&cfg).is_err());
        cfg.min_weight = 0.0;
        cfg.mean_photons = vec![];
        assert!(eta_search(&cfg).is_err());
    }
}
