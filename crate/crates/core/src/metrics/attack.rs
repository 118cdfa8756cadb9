use crate::cipher::{secret_from_index, EveMode, Protocol};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Largest key length [`key_attack`] will enumerate.
pub const MAX_ATTACK_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyPosterior {
    pub key_bits: usize,
    pub slots: usize,
    /// Posterior probability of each key value, indexed by the value.
    pub posterior: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    /// Most probable key value.
    pub map_key: u64,
    /// Posterior mass of `map_key`.
    pub guessing_probability: f64,
    pub entropy_bits: f64,
}

/// Posterior over every `key_bits`-bit secret key given Eve's outcomes.
///
/// Eve knows the source prior, the prior schedule with its physical key,
/// and her own minimax channel `P_E`. Under key `K` the likelihood of slot
/// `t` is `Σ_x Q(x) P_E(y_t | π_t(x))`; the prior over keys is uniform.
pub fn key_attack(outcomes: &[usize], key_bits: usize, protocol: &Protocol) -> Result<KeyPosterior> {
    if key_bits == 0 || key_bits > MAX_ATTACK_BITS {
        return Err(Error::InvalidConfig(format!(
            "key attack enumerates 1..={MAX_ATTACK_BITS} bits, got {key_bits}"
        )));
    }
    let channel = match (protocol.eve_mode(), protocol.minimax()) {
        (EveMode::Minimax, Some((_, c))) => c,
        _ => {
            return Err(Error::ModelMismatch(
                "the key attack models a minimax eavesdropper".into(),
            ))
        }
    };
    let m = protocol.m();
    if let Some(&y) = outcomes.iter().find(|&&y| y >= m) {
        return Err(Error::SymbolOutOfRange { symbol: y, alphabet: m });
    }
    let q = protocol.cipher().schedule().source().weights();
    let base = protocol.cipher();
    let log_likelihood: Vec<f64> = (0..1u64 << key_bits)
        .into_par_iter()
        .map(|index| -> Result<f64> {
            let cipher = base.with_secret(&secret_from_index(index, key_bits)?);
            let mut ll = 0.0;
            for (t, &y) in outcomes.iter().enumerate() {
                let pi = cipher.slot_key(t as u64).permutation;
                let p: f64 = q.iter().enumerate().map(|(x, qx)| qx * channel.prob(pi.apply(x), y)).sum();
                ll += p.ln();
                if ll == f64::NEG_INFINITY {
                    break;
                }
            }
            Ok(ll)
        })
        .collect::<Result<_>>()?;
    let max = log_likelihood.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ModelMismatch("every key assigns the transcript zero probability".into()));
    }
    let weights: Vec<f64> = log_likelihood.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let posterior: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let (map_key, &guessing_probability) = posterior
        .iter()
        .enumerate()
        .fold((0, &posterior[0]), |best, (i, p)| if *p > *best.1 { (i, p) } else { best });
    Ok(KeyPosterior {
        key_bits,
        slots: outcomes.len(),
        entropy_bits: super::entropy_bits(&posterior),
        posterior,
        log_likelihood,
        map_key: map_key as u64,
        guessing_probability,
    })
}
