use super::channel::Channel;
use super::keystream::{KeyBits, KeySpec, PhysicalKey, SecretKey};
use super::permutation::Permutation;
use super::schedule::{Cipher, PriorSchedule, SlotKey, DEFAULT_FRAME_LENGTH};
use super::transcript::{Slot, Transcript};
use crate::detection::{
    bayes_solve, minimax_solve, CostMatrix, DetectionProblem, MinimaxSolution, PriorDistribution,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::states::{StateModel, StateVectors};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

/// Slots per independently seeded block.
pub const BLOCK: u64 = 8192;

/// Slots of one block and their predicted (Bob, Eve) error probabilities.
type Block = (Vec<Slot>, Vec<(f64, f64)>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EveMode {
    /// Minimax POVM; the prior is unknown to Eve.
    #[default]
    Minimax,
    /// Control: Eve is handed the slot prior and runs the Bayes POVM.
    Informed,
}

fn default_frame_length() -> usize {
    DEFAULT_FRAME_LENGTH
}

fn unit() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub states: StateModel,
    /// Plaintext source distribution `Q`.
    pub source: Vec<f64>,
    /// Frame priors `Ω^(k)`, each a rearrangement of `source`.
    pub family: Vec<Vec<f64>>,
    #[serde(default = "default_frame_length")]
    pub frame_length: usize,
    pub slots: usize,
    pub secret_key: KeySpec,
    pub physical_key: KeySpec,
    pub seed: u64,
    #[serde(default = "unit")]
    pub transmittance_bob: f64,
    #[serde(default = "unit")]
    pub transmittance_eve: f64,
    #[serde(default)]
    pub eve: EveMode,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl SessionConfig {
    pub fn schedule(&self) -> Result<PriorSchedule> {
        let m = self.states.m();
        if self.source.len() != m {
            return Err(Error::InvalidConfig(format!(
                "source has {} weights for {m} states",
                self.source.len()
            )));
        }
        let source = PriorDistribution::new(self.source.clone())?;
        let family = self
            .family
            .iter()
            .map(|w| PriorDistribution::new(w.clone()))
            .collect::<Result<_>>()?;
        PriorSchedule::new(source, family, self.frame_length)
    }

    pub fn secret(&self) -> Result<SecretKey> {
        Ok(SecretKey(self.secret_key.parse()?))
    }

    pub fn physical(&self) -> Result<PhysicalKey> {
        Ok(PhysicalKey(self.physical_key.parse()?))
    }
}

/// Both receivers for one slot prior.
#[derive(Debug, Clone)]
pub struct Receivers {
    pub prior: Vec<f64>,
    pub bob: Channel,
    pub eve: Arc<Channel>,
    /// Predicted error probabilities at `prior`.
    pub bob_error: f64,
    pub eve_error: f64,
}

/// A configured protocol instance: keys, attenuated state sets, and the
/// receivers for every slot prior met so far.
///
/// Bob's Bayes POVM is solved once per distinct slot prior. With `M`
/// symbols there can be up to `M!·K` of them, so sessions are practical
/// for small alphabets.
#[derive(Debug)]
pub struct Protocol {
    cipher: Cipher,
    bob_states: StateVectors,
    eve_states: StateVectors,
    eve_mode: EveMode,
    tol: f64,
    minimax: Option<(MinimaxSolution, Arc<Channel>)>,
    receivers: Vec<Arc<Receivers>>,
    by_permutation: HashMap<Permutation, usize>,
    prepared: u64,
}

fn prior_bits(p: &[f64]) -> Vec<u64> {
    p.iter().map(|w| w.to_bits()).collect()
}

impl Protocol {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        Self::with_secret(config, config.secret()?)
    }

    /// The configured protocol under a different secret key.
    pub fn with_secret(config: &SessionConfig, secret: SecretKey) -> Result<Self> {
        if config.tol.is_nan() || config.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", config.tol)));
        }
        let schedule = config.schedule()?;
        let cipher = Cipher::new(&secret, &config.physical()?, schedule);
        let bob_states = config.states.states(config.transmittance_bob)?;
        let eve_states = config.states.states(config.transmittance_eve)?;
        let minimax = match config.eve {
            EveMode::Minimax => {
                let m = eve_states.count();
                let sol = minimax_solve(&eve_states, &CostMatrix::error_probability(m), config.tol)?;
                if !sol.converged {
                    return Err(Error::NotConverged {
                        iterations: sol.iterations,
                        residual: sol.equal_error_spread.max(sol.bayes_residual),
                    });
                }
                let channel = Arc::new(Channel::from_measurement(&sol.measurement, &eve_states)?);
                Some((sol, channel))
            }
            EveMode::Informed => None,
        };
        Ok(Self {
            cipher,
            bob_states,
            eve_states,
            eve_mode: config.eve,
            tol: config.tol,
            minimax,
            receivers: Vec::new(),
            by_permutation: HashMap::new(),
            prepared: 0,
        })
    }

    pub fn cipher(&self) -> &Cipher {
        &self.cipher
    }

    pub fn m(&self) -> usize {
        self.cipher.m()
    }

    pub fn eve_mode(&self) -> EveMode {
        self.eve_mode
    }

    pub fn bob_states(&self) -> &StateVectors {
        &self.bob_states
    }

    pub fn eve_states(&self) -> &StateVectors {
        &self.eve_states
    }

    /// Eve's minimax solution and channel, when she runs minimax.
    pub fn minimax(&self) -> Option<(&MinimaxSolution, &Channel)> {
        self.minimax.as_ref().map(|(s, c)| (s, c.as_ref()))
    }

    /// Number of distinct slot priors solved so far.
    pub fn distinct_priors(&self) -> usize {
        self.receivers.len()
    }

    fn bayes_channel(&self, states: &StateVectors, prior: &[f64]) -> Result<Channel> {
        let p = DetectionProblem::error_probability(states.clone(), PriorDistribution::new(prior.to_vec())?)?;
        let sol = bayes_solve(&p, self.tol, DEFAULT_MAX_ITER)?;
        if !sol.converged {
            return Err(Error::NotConverged {
                iterations: sol.iterations,
                residual: sol.optimality_residual,
            });
        }
        Channel::from_measurement(&sol.measurement, states)
    }

    /// Solves the receivers for every slot prior in `0..count`.
    pub fn prepare(&mut self, count: u64) -> Result<()> {
        if count <= self.prepared {
            return Ok(());
        }
        let mut fresh: Vec<Permutation> = Vec::new();
        let mut seen = HashSet::new();
        for t in self.prepared..count {
            let key = self.cipher.slot_key(t);
            if !self.by_permutation.contains_key(&key.permutation) && seen.insert(key.permutation.clone()) {
                fresh.push(key.permutation);
            }
        }
        let mut by_prior: HashMap<Vec<u64>, usize> = self
            .receivers
            .iter()
            .enumerate()
            .map(|(i, r)| (prior_bits(&r.prior), i))
            .collect();
        let source = self.cipher.schedule().source().weights().to_vec();
        let mut todo: Vec<Vec<f64>> = Vec::new();
        let mut slot_of: Vec<usize> = Vec::with_capacity(fresh.len());
        for perm in &fresh {
            let prior = perm.push_forward(&source);
            let bits = prior_bits(&prior);
            let idx = match by_prior.get(&bits) {
                Some(&i) => i,
                None => {
                    let i = self.receivers.len() + todo.len();
                    by_prior.insert(bits, i);
                    todo.push(prior);
                    i
                }
            };
            slot_of.push(idx);
        }
        let solved: Vec<Receivers> = todo
            .into_par_iter()
            .map(|prior| self.receivers_for(prior))
            .collect::<Result<_>>()?;
        self.receivers.extend(solved.into_iter().map(Arc::new));
        for (perm, idx) in fresh.into_iter().zip(slot_of) {
            self.by_permutation.insert(perm, idx);
        }
        self.prepared = count;
        Ok(())
    }

    fn receivers_for(&self, prior: Vec<f64>) -> Result<Receivers> {
        let bob = self.bayes_channel(&self.bob_states, &prior)?;
        let eve = match &self.minimax {
            Some((_, channel)) => channel.clone(),
            None => Arc::new(self.bayes_channel(&self.eve_states, &prior)?),
        };
        Ok(Receivers {
            bob_error: bob.error_probability(&prior),
            eve_error: eve.error_probability(&prior),
            prior,
            bob,
            eve,
        })
    }

    /// Keys and receivers of slot `t`; the slot must be prepared.
    pub fn slot(&self, t: u64) -> (SlotKey, &Receivers) {
        assert!(t < self.prepared, "slot {t} not prepared");
        let key = self.cipher.slot_key(t);
        let r = &self.receivers[self.by_permutation[&key.permutation]];
        (key, r)
    }

    /// Simulates slots `0..count` with sampling seeded by `seed`.
    pub fn run(&mut self, count: usize, seed: u64) -> Result<Session> {
        self.prepare(count as u64)?;
        let source = WeightedIndex::new(self.cipher.schedule().source().weights())
            .map_err(|e| Error::InvalidConfig(format!("source distribution: {e}")))?;
        let blocks = (count as u64).div_ceil(BLOCK);
        let this = &*self;
        let parts: Vec<Block> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b);
                let end = ((b + 1) * BLOCK).min(count as u64);
                let mut slots = Vec::with_capacity((end - b * BLOCK) as usize);
                let mut predicted = Vec::with_capacity(slots.capacity());
                for t in b * BLOCK..end {
                    let (key, r) = this.slot(t);
                    let x = source.sample(&mut rng);
                    let s = key.permutation.apply(x);
                    let y_bob = r.bob.sample(s, &mut rng);
                    let y_eve = r.eve.sample(s, &mut rng);
                    slots.push(Slot {
                        t,
                        x,
                        running_key: key.running.rank(),
                        k: key.k,
                        s,
                        y_bob,
                        y_eve,
                    });
                    predicted.push((r.bob_error, r.eve_error));
                }
                (slots, predicted)
            })
            .collect();
        let mut slots = Vec::with_capacity(count);
        let mut predicted = Vec::with_capacity(count);
        for (s, p) in parts {
            slots.extend(s);
            predicted.extend(p);
        }
        let transcript = Transcript { m: self.m(), slots };
        let plaintext = decrypt(&transcript, &self.cipher)?;
        let summary = SessionSummary::new(&transcript, &predicted, &plaintext, self);
        Ok(Session { transcript, summary })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub errors: usize,
    pub empirical: f64,
    /// Mean of the per-slot predicted error probabilities.
    pub predicted: f64,
    /// Standard deviation of `empirical` under the prediction (independent
    /// Bernoulli slots).
    pub sigma: f64,
}

impl ErrorStats {
    fn new(errors: usize, probabilities: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut var) = (0usize, 0.0, 0.0);
        for p in probabilities {
            n += 1;
            sum += p;
            var += p * (1.0 - p);
        }
        let nf = n.max(1) as f64;
        Self {
            errors,
            empirical: errors as f64 / nf,
            predicted: sum / nf,
            sigma: var.max(0.0).sqrt() / nf,
        }
    }

    /// `|empirical − predicted|` in units of `sigma` (0 when both agree exactly).
    pub fn deviation(&self) -> f64 {
        let diff = (self.empirical - self.predicted).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.sigma
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub slots: usize,
    pub m: usize,
    pub eve_mode: EveMode,
    /// Errors of Bob's outcome against the transmitted index.
    pub bob: ErrorStats,
    pub eve: ErrorStats,
    /// Symbol error rate of Bob's decrypted plaintext.
    pub plaintext_error_rate: f64,
    /// Slots where Bob's and Eve's outcomes differ.
    pub hamming_distance: usize,
    pub distinct_priors: usize,
}

impl SessionSummary {
    fn new(tr: &Transcript, predicted: &[(f64, f64)], plaintext: &[usize], protocol: &Protocol) -> Self {
        let bob_errors = tr.slots.iter().filter(|s| s.y_bob != s.s).count();
        let eve_errors = tr.slots.iter().filter(|s| s.y_eve != s.s).count();
        let wrong = tr.slots.iter().zip(plaintext).filter(|(s, x)| s.x != **x).count();
        Self {
            slots: tr.len(),
            m: tr.m,
            eve_mode: protocol.eve_mode,
            bob: ErrorStats::new(bob_errors, predicted.iter().map(|p| p.0)),
            eve: ErrorStats::new(eve_errors, predicted.iter().map(|p| p.1)),
            plaintext_error_rate: wrong as f64 / tr.len().max(1) as f64,
            hamming_distance: tr.hamming_distance(),
            distinct_priors: protocol.distinct_priors(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub transcript: Transcript,
    pub summary: SessionSummary,
}

/// Runs the configured session end to end.
pub fn run_session(config: &SessionConfig) -> Result<Session> {
    Protocol::new(config)?.run(config.slots, config.seed)
}

/// Bob's plaintext estimate `x̂_t = π_t⁻¹(y_t^B)`.
///
/// With the wrong keys this silently returns scrambled symbols; a key
/// mismatch shows only in the statistics.
pub fn decrypt(tr: &Transcript, cipher: &Cipher) -> Result<Vec<usize>> {
    if tr.m != cipher.m() {
        return Err(Error::DimensionMismatch(format!("transcript has M = {}, cipher M = {}", tr.m, cipher.m())));
    }
    tr.slots
        .iter()
        .map(|s| cipher.decrypt(s.y_bob, s.t))
        .collect()
}

/// Plaintext bits to symbols, `log₂ M` bits per symbol, most significant
/// first. `M` must be a power of two and the bit count a multiple of
/// `log₂ M`.
pub fn bits_to_symbols(bits: &[bool], m: usize) -> Result<Vec<usize>> {
    let width = symbol_width(m)?;
    if width == 0 || !bits.len().is_multiple_of(width) {
        return Err(Error::InvalidConfig(format!(
            "{} bits do not split into {width}-bit symbols",
            bits.len()
        )));
    }
    Ok(bits
        .chunks(width)
        .map(|c| c.iter().fold(0, |acc, &b| acc << 1 | b as usize))
        .collect())
}

pub fn symbols_to_bits(symbols: &[usize], m: usize) -> Result<Vec<bool>> {
    let width = symbol_width(m)?;
    let mut out = Vec::with_capacity(symbols.len() * width);
    for &s in symbols {
        if s >= m {
            return Err(Error::SymbolOutOfRange { symbol: s, alphabet: m });
        }
        out.extend((0..width).rev().map(|i| s >> i & 1 == 1));
    }
    Ok(out)
}

fn symbol_width(m: usize) -> Result<usize> {
    if !m.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("bit adapter needs a power-of-two alphabet, got {m}")));
    }
    Ok(m.trailing_zeros() as usize)
}

/// Secret key with the given value and length, for enumerations.
pub fn secret_from_index(index: u64, bits: usize) -> Result<SecretKey> {
    Ok(SecretKey(KeyBits::from_u64(index, bits)?))
}
