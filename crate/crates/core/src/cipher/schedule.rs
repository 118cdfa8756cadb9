use super::keystream::{Keystream, PhysicalKey, SecretKey};
use super::permutation::Permutation;
use crate::detection::PriorDistribution;
use crate::error::{Error, Result};

pub const DEFAULT_FRAME_LENGTH: usize = 64;
/// Two priors are rearrangements of each other if their sorted entries
/// agree to this tolerance.
const REARRANGEMENT_TOL: f64 = 1e-12;

/// Source distribution `Q`, the family of frame priors `Ω^(k)`, and the
/// frame length.
///
/// Every `Ω^(k)` must be a rearrangement of `Q`: the cipher only permutes
/// symbols, so it can realize exactly the priors with the same multiset of
/// weights.
#[derive(Debug, Clone)]
pub struct PriorSchedule {
    source: PriorDistribution,
    family: Vec<PriorDistribution>,
    alignments: Vec<Permutation>,
    frame_length: usize,
}

impl PriorSchedule {
    pub fn new(source: PriorDistribution, family: Vec<PriorDistribution>, frame_length: usize) -> Result<Self> {
        if frame_length == 0 {
            return Err(Error::InvalidConfig("frame length must be at least 1".into()));
        }
        if family.is_empty() {
            return Err(Error::InvalidConfig("prior family is empty".into()));
        }
        let alignments = family
            .iter()
            .map(|omega| {
                if omega.len() != source.len() {
                    return Err(Error::InvalidConfig(format!(
                        "family prior has {} weights, source has {}",
                        omega.len(),
                        source.len()
                    )));
                }
                Permutation::matching(source.weights(), omega.weights(), REARRANGEMENT_TOL)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            source,
            family,
            alignments,
            frame_length,
        })
    }

    pub fn m(&self) -> usize {
        self.source.len()
    }

    pub fn source(&self) -> &PriorDistribution {
        &self.source
    }

    pub fn family(&self) -> &[PriorDistribution] {
        &self.family
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    /// `β_k` with `β_k(Q) = Ω^(k)`.
    pub fn alignment(&self, k: usize) -> &Permutation {
        &self.alignments[k]
    }

    /// Family index of the frame containing slot `t`.
    pub fn prior_index(&self, physical: &Keystream, t: u64) -> usize {
        physical.symbol(t / self.frame_length as u64, self.family.len())
    }
}

/// Keys of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotKey {
    /// Frame prior index `k_t`.
    pub k: usize,
    /// Running-key permutation `ρ_t`.
    pub running: Permutation,
    /// `π_t = ρ_t ∘ β_{k_t}`: plaintext symbol to transmitted index.
    pub permutation: Permutation,
}

/// The mathematical box and the prior-control box under fixed keys.
#[derive(Debug, Clone)]
pub struct Cipher {
    secret: Keystream,
    physical: Keystream,
    schedule: PriorSchedule,
}

impl Cipher {
    pub fn new(secret: &SecretKey, physical: &PhysicalKey, schedule: PriorSchedule) -> Self {
        Self {
            secret: secret.keystream(),
            physical: physical.keystream(),
            schedule,
        }
    }

    /// The same physical key and schedule under another secret key.
    pub fn with_secret(&self, secret: &SecretKey) -> Self {
        Self {
            secret: secret.keystream(),
            physical: self.physical,
            schedule: self.schedule.clone(),
        }
    }

    pub fn schedule(&self) -> &PriorSchedule {
        &self.schedule
    }

    pub fn m(&self) -> usize {
        self.schedule.m()
    }

    /// Slot `t` reads running-key words `t·M … t·M + M − 2`.
    pub fn slot_key(&self, t: u64) -> SlotKey {
        let m = self.m();
        let base = t * m as u64;
        let running = Permutation::shuffle(m, (0..).map(|j| self.secret.word(base + j)));
        let k = self.schedule.prior_index(&self.physical, t);
        let permutation = running.compose(self.schedule.alignment(k));
        SlotKey { k, running, permutation }
    }

    /// Prior of the transmitted index in slot `t`: `π_t` applied to `Q`.
    pub fn slot_prior(&self, key: &SlotKey) -> Vec<f64> {
        key.permutation.push_forward(self.schedule.source.weights())
    }

    pub fn encrypt(&self, x: usize, t: u64) -> Result<usize> {
        self.check(x)?;
        Ok(self.slot_key(t).permutation.apply(x))
    }

    pub fn decrypt(&self, s: usize, t: u64) -> Result<usize> {
        self.check(s)?;
        Ok(self.slot_key(t).permutation.inverse().apply(s))
    }

    fn check(&self, symbol: usize) -> Result<()> {
        if symbol >= self.m() {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: self.m(),
            });
        }
        Ok(())
    }
}

/// Transmitted index of plaintext symbol `x` in slot `t`.
pub fn encrypt_slot(x: usize, t: u64, cipher: &Cipher) -> Result<usize> {
    cipher.encrypt(x, t)
}
