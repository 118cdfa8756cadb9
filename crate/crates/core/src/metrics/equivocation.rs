use crate::cipher::{Channel, Permutation, Protocol};
use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;

/// Shannon entropy in bits; zero weights contribute nothing.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&w| w > 0.0).map(|&w| w * w.log2()).sum::<f64>()
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// Fano's upper bound on `H(X | Y)` for error probability `pe` over `m`
/// symbols.
pub fn fano_bound(pe: f64, m: usize) -> f64 {
    let pe = pe.clamp(0.0, 1.0);
    let tail = if m > 1 { pe * ((m - 1) as f64).log2() } else { 0.0 };
    binary_entropy(pe) + tail
}

/// Posterior over plaintext symbols given outcome `y` of a slot with
/// permutation `pi`, or `None` when `y` has probability zero.
fn posterior(q: &[f64], pi: &Permutation, channel: &Channel, y: usize) -> Option<Vec<f64>> {
    let w: Vec<f64> = q.iter().enumerate().map(|(x, qx)| qx * channel.prob(pi.apply(x), y)).collect();
    let total: f64 = w.iter().sum();
    (total > 0.0).then(|| w.into_iter().map(|v| v / total).collect())
}

/// `H(X | Y)` for one slot, summed exactly over outcomes.
fn slot_equivocation(q: &[f64], pi: &Permutation, channel: &Channel) -> f64 {
    (0..q.len())
        .map(|y| {
            let py: f64 = q.iter().enumerate().map(|(x, qx)| qx * channel.prob(pi.apply(x), y)).sum();
            match posterior(q, pi, channel, y) {
                Some(post) => py * entropy_bits(&post),
                None => 0.0,
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivocationEstimate {
    /// Monte-Carlo mean of the per-slot posterior entropy, in bits.
    pub bits: f64,
    pub standard_error: f64,
    /// Expectation over outcomes for the same slot keys.
    pub exact: f64,
    /// Mean predicted error probability over the sampled slots.
    pub error_rate: f64,
    /// Fano bound at `error_rate`.
    pub fano: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivocationReport {
    pub samples: usize,
    pub m: usize,
    pub eve: EquivocationEstimate,
    pub bob: EquivocationEstimate,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `H(X | Y, keys)` for both receivers, estimated from `samples` simulated
/// slots.
///
/// Every slot contributes the entropy of the posterior over the plaintext
/// given its outcome, its keys, the source prior, and the receiver's
/// channel. The exact figure averages the same quantity over outcomes
/// instead of sampling them.
pub fn equivocation_given_key(protocol: &mut Protocol, samples: usize, seed: u64) -> Result<EquivocationReport> {
    if samples == 0 {
        return Err(Error::InvalidConfig("equivocation needs at least one sample".into()));
    }
    let session = protocol.run(samples, seed)?;
    let q = protocol.cipher().schedule().source().weights().to_vec();
    let mut eve_h = Vec::with_capacity(samples);
    let mut bob_h = Vec::with_capacity(samples);
    let mut exact_cache: HashMap<Permutation, (f64, f64)> = HashMap::new();
    let (mut eve_exact, mut bob_exact, mut eve_pe, mut bob_pe) = (0.0, 0.0, 0.0, 0.0);
    for slot in &session.transcript.slots {
        let (key, r) = protocol.slot(slot.t);
        let pi = &key.permutation;
        let eve = posterior(&q, pi, &r.eve, slot.y_eve).ok_or_else(|| impossible(slot.y_eve))?;
        let bob = posterior(&q, pi, &r.bob, slot.y_bob).ok_or_else(|| impossible(slot.y_bob))?;
        eve_h.push(entropy_bits(&eve));
        bob_h.push(entropy_bits(&bob));
        let (e, b) = *exact_cache
            .entry(pi.clone())
            .or_insert_with(|| (slot_equivocation(&q, pi, &r.eve), slot_equivocation(&q, pi, &r.bob)));
        eve_exact += e;
        bob_exact += b;
        eve_pe += r.eve_error;
        bob_pe += r.bob_error;
    }
    let n = samples as f64;
    let m = protocol.m();
    let estimate = |h: &[f64], exact: f64, pe: f64| {
        let (bits, standard_error) = mean_se(h);
        EquivocationEstimate {
            bits,
            standard_error,
            exact: exact / n,
            error_rate: pe / n,
            fano: fano_bound(pe / n, m),
        }
    };
    Ok(EquivocationReport {
        samples,
        m,
        eve: estimate(&eve_h, eve_exact, eve_pe),
        bob: estimate(&bob_h, bob_exact, bob_pe),
    })
}

fn impossible(y: usize) -> Error {
    Error::ModelMismatch(format!("outcome {y} has zero probability under the receiver model"))
}
