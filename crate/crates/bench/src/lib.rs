//! Benchmark fixtures shared by the bench targets.

use priorcipher::cipher::{EveMode, KeySpec, SessionConfig, DEFAULT_FRAME_LENGTH};
use priorcipher::detection::DEFAULT_TOL;
use priorcipher::states::{Constellation, StateModel, StateVectors};

pub fn psk(m: usize, mean_photon: f64) -> StateVectors {
    Constellation::build("psk", m, mean_photon, 0.0)
        .and_then(|c| c.state_vectors())
        .expect("valid constellation")
}

/// 3-PSK at one photon with a skewed source and a rotated family.
pub fn psk3_session(slots: usize) -> SessionConfig {
    SessionConfig {
        states: StateModel::Psk { m: 3, mean_photon: 1.0 },
        source: vec![0.6, 0.3, 0.1],
        family: vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.6, 0.3]],
        frame_length: DEFAULT_FRAME_LENGTH,
        slots,
        secret_key: KeySpec { hex: "3c5a".into(), bits: None },
        physical_key: KeySpec { hex: "91".into(), bits: None },
        seed: 1,
        transmittance_bob: 1.0,
        transmittance_eve: 1.0,
        eve: EveMode::Minimax,
        tol: DEFAULT_TOL,
    }
}
