//! Security figures of merit: the minimax-versus-Bayes advantage ratio and
//! its maximization, equivocation given the keys, and a brute-force key
//! posterior.

mod advantage;
mod attack;
mod equivocation;

pub use advantage::{
    advantage_ratio, advantage_with, eta_search, AdvantageReport, EtaSearchConfig, EtaSearchResult, SearchPhase,
    SurfacePoint, ZERO_ERROR,
};
pub use attack::{key_attack, KeyPosterior, MAX_ATTACK_BITS};
pub use equivocation::{
    binary_entropy, entropy_bits, equivocation_given_key, fano_bound, EquivocationEstimate, EquivocationReport,
};
