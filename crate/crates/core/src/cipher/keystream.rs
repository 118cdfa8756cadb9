//! Keys and the running-key generator.
//!
//! The generator is SplitMix64 in counter mode: word `i` of a stream with
//! seed `s` is `mix64(s + (i + 1)·φ)`, where `φ = 0x9e3779b97f4a7c15`.
//! Any word can be computed without the ones before it, which lets slot
//! blocks be processed independently. It is a statistical mixer, not a
//! cryptographic generator.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const SECRET_DOMAIN: u64 = 0x5345_4352_4554_4b53;
const PHYSICAL_DOMAIN: u64 = 0x5048_5953_4b45_5953;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps a uniform word onto `0..n` by the high half of `word · n`.
///
/// The bias is below `n / 2⁶⁴`.
pub fn reduce(word: u64, n: usize) -> usize {
    ((word as u128 * n as u128) >> 64) as usize
}

/// A bit string of fixed length, stored big-endian in the fewest bytes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct KeyBits {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl KeyBits {
    /// Parses hex digits (optional `0x` prefix). Without `bit_len` the
    /// length is four bits per digit; with it, the value must fit.
    pub fn from_hex(text: &str, bit_len: Option<usize>) -> Result<Self> {
        let digits = text.trim().trim_start_matches("0x");
        if digits.is_empty() {
            return Err(Error::InvalidKey("empty hex string".into()));
        }
        let padded = if digits.len() % 2 == 1 {
            format!("0{digits}")
        } else {
            digits.to_string()
        };
        let raw = hex::decode(&padded).map_err(|e| Error::InvalidKey(format!("`{text}`: {e}")))?;
        Self::from_be_bytes(&raw, bit_len.unwrap_or(4 * digits.len()))
    }

    pub fn from_u64(value: u64, bit_len: usize) -> Result<Self> {
        Self::from_be_bytes(&value.to_be_bytes(), bit_len)
    }

    fn from_be_bytes(raw: &[u8], bit_len: usize) -> Result<Self> {
        if bit_len == 0 {
            return Err(Error::InvalidKey("key length must be at least one bit".into()));
        }
        let n = bit_len.div_ceil(8);
        let (head, tail) = if raw.len() > n { raw.split_at(raw.len() - n) } else { (&raw[..0], raw) };
        if head.iter().any(|&b| b != 0) {
            return Err(Error::InvalidKey(format!("value does not fit in {bit_len} bits")));
        }
        let mut bytes = vec![0u8; n - tail.len()];
        bytes.extend_from_slice(tail);
        let spare = 8 * n - bit_len;
        if spare > 0 && bytes[0] >> (8 - spare) != 0 {
            return Err(Error::InvalidKey(format!("value does not fit in {bit_len} bits")));
        }
        Ok(Self { bytes, bit_len })
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    /// Bit `i`, counted from the least significant end.
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.bit_len, "bit {i} of a {}-bit key", self.bit_len);
        let byte = self.bytes[self.bytes.len() - 1 - i / 8];
        byte >> (i % 8) & 1 == 1
    }

    pub fn with_bit_flipped(&self, i: usize) -> Self {
        assert!(i < self.bit_len, "bit {i} of a {}-bit key", self.bit_len);
        let mut out = self.clone();
        let n = out.bytes.len();
        out.bytes[n - 1 - i / 8] ^= 1 << (i % 8);
        out
    }

    /// Absorbs the length and the bytes into a 64-bit stream seed.
    fn seed(&self, domain: u64) -> u64 {
        let mut h = mix64(domain ^ self.bit_len as u64);
        for chunk in self.bytes.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            h = mix64(h.wrapping_add(GOLDEN) ^ u64::from_le_bytes(word));
        }
        h
    }
}

impl fmt::Debug for KeyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyBits({} bits, 0x{})", self.bit_len, self.to_hex())
    }
}

/// Hex text plus an optional explicit length, as written in configs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySpec {
    pub hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<usize>,
}

impl KeySpec {
    pub fn parse(&self) -> Result<KeyBits> {
        KeyBits::from_hex(&self.hex, self.bits)
    }
}

/// Seeds the running key that drives the per-slot permutations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SecretKey(pub KeyBits);

/// Seeds the per-frame choice of transmitted prior. Independent of the
/// secret key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhysicalKey(pub KeyBits);

impl SecretKey {
    pub fn keystream(&self) -> Keystream {
        Keystream::from_seed(self.0.seed(SECRET_DOMAIN))
    }
}

impl PhysicalKey {
    pub fn keystream(&self) -> Keystream {
        Keystream::from_seed(self.0.seed(PHYSICAL_DOMAIN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Keystream {
    seed: u64,
}

impl Keystream {
    pub fn from_seed(seed: u64) -> Self {
        Self { seed }
    }

    pub fn word(&self, index: u64) -> u64 {
        mix64(self.seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
    }

    pub fn symbol(&self, index: u64, alphabet: usize) -> usize {
        reduce(self.word(index), alphabet)
    }

    /// The first `count` symbols over `0..alphabet`.
    pub fn symbols(&self, count: usize, alphabet: usize) -> Vec<usize> {
        (0..count as u64).map(|i| self.symbol(i, alphabet)).collect()
    }
}

/// Running-key symbols of `key` over `0..alphabet`.
pub fn keystream(key: &SecretKey, count: usize, alphabet: usize) -> Vec<usize> {
    key.keystream().symbols(count, alphabet)
}
