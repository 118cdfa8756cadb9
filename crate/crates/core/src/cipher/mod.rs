//! Keyed-prior stream cipher over coherent states.
//!
//! Per slot `t` the plaintext symbol `x ~ Q` is sent as index
//! `s = π_t(x)` with `π_t = ρ_t ∘ β_{k_t}`:
//!
//! * `ρ_t` is a permutation drawn from the secret key's running key;
//! * `k_t` picks the frame prior `Ω^(k)` from the physical key, and `β_k`
//!   rearranges `Q` into `Ω^(k)`.
//!
//! The transmitted index therefore has prior `ρ_t(Ω^(k_t))`, known only to
//! holders of both keys. Bob measures with the Bayes POVM for that prior;
//! Eve, without it, uses the minimax POVM.

mod channel;
mod keystream;
mod permutation;
mod schedule;
mod session;
mod transcript;

pub use channel::{measure, Channel, ROW_TOL};
pub use keystream::{keystream, mix64, reduce, KeyBits, KeySpec, Keystream, PhysicalKey, SecretKey};
pub use permutation::Permutation;
pub use schedule::{encrypt_slot, Cipher, PriorSchedule, SlotKey, DEFAULT_FRAME_LENGTH};
pub use session::{
    bits_to_symbols, decrypt, run_session, secret_from_index, symbols_to_bits, ErrorStats, EveMode, Protocol,
    Receivers, Session, SessionConfig, SessionSummary, BLOCK,
};
pub use transcript::{Slot, Transcript, TRANSCRIPT_SCHEMA};
