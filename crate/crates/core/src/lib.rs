//! Optimal quantum measurements for coherent-state constellations and a
//! simulator for a stream cipher whose transmitted prior is keyed.
//!
//! * [`states`]: constellations, Gram matrices, finite-dimensional embedding.
//! * [`detection`]: Bayes and minimax POVMs with optimality certificates.
//! * [`cipher`]: keystreams, prior control, and end-to-end sessions.
//! * [`metrics`]: advantage ratios, equivocation, exhaustive key attack.

pub mod cipher;
pub mod detection;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod sdp;
pub mod states;

pub use error::{Error, Result};
