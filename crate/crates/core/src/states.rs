//! Coherent-state constellations and their exact finite-dimensional model.
//!
//! A set of M pure states is fully described by its Gram matrix. We factor
//! the Gram matrix to obtain M vectors in a space of dimension equal to its
//! numerical rank; every detection quantity downstream only needs these.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Complex field amplitude `α` of a coherent state `|α⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub re: f64,
    pub im: f64,
}

impl Amplitude {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn from_polar(magnitude: f64, phase: f64) -> Self {
        Self::new(magnitude * phase.cos(), magnitude * phase.sin())
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Mean photon number `|α|²`.
    pub fn mean_photon(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn phase(self) -> f64 {
        self.im.atan2(self.re)
    }

    fn is_valid(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// `⟨a|b⟩ = exp(−|a|²/2 − |b|²/2 + a*·b)`.
pub fn coherent_inner_product(a: Amplitude, b: Amplitude) -> Complex64 {
    let (a, b) = (a.as_complex(), b.as_complex());
    (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationKind {
    Psk,
    PskAsym,
    Qam,
    Custom,
}

impl ConstellationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Psk => "psk",
            Self::PskAsym => "psk-asym",
            Self::Qam => "qam",
            Self::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psk" => Ok(Self::Psk),
            "psk-asym" => Ok(Self::PskAsym),
            "qam" => Ok(Self::Qam),
            "custom" => Ok(Self::Custom),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Ordered set of coherent-state amplitudes, in transmission-index order.
///
/// Serializes as `{label, m, mean_photon, theta, amplitudes: [{re, im}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub label: ConstellationKind,
    pub m: usize,
    pub mean_photon: f64,
    pub theta: f64,
    pub amplitudes: Vec<Amplitude>,
}

/// First PSK phase.
pub const PSK_BASE_PHASE: f64 = PI / 2.0;

impl Constellation {
    /// Builds a parameterized constellation.
    ///
    /// * `psk`: phases `π/2 + 2πk/M`, all with `|α|² = mean_photon`.
    /// * `psk-asym`: as `psk` with `theta` added to the last phase (`theta ≠ 0`).
    /// * `qam`: the first `M` points of the smallest square grid holding them,
    ///   centered and scaled to average photon number `mean_photon`.
    ///
    /// `custom` constellations come from [`Constellation::custom`].
    pub fn build(label: &str, m: usize, mean_photon: f64, theta: f64) -> Result<Self> {
        let kind: ConstellationKind = label.parse()?;
        if m == 0 {
            return Err(Error::InvalidConstellation("M must be at least 1".into()));
        }
        if !(mean_photon.is_finite() && mean_photon >= 0.0) {
            return Err(Error::InvalidConstellation(format!(
                "mean photon number must be finite and non-negative, got {mean_photon}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidConstellation("theta must be finite".into()));
        }
        let magnitude = mean_photon.sqrt();
        let amplitudes = match kind {
            ConstellationKind::Psk | ConstellationKind::PskAsym => {
                if kind == ConstellationKind::PskAsym && theta == 0.0 {
                    return Err(Error::InvalidConstellation(
                        "psk-asym requires a nonzero theta; use psk for the symmetric set".into(),
                    ));
                }
                (0..m)
                    .map(|k| {
                        let mut phase = PSK_BASE_PHASE + 2.0 * PI * k as f64 / m as f64;
                        if kind == ConstellationKind::PskAsym && k + 1 == m {
                            phase += theta;
                        }
                        Amplitude::from_polar(magnitude, phase)
                    })
                    .collect()
            }
            ConstellationKind::Qam => qam_grid(m, mean_photon),
            ConstellationKind::Custom => {
                return Err(Error::InvalidConstellation(
                    "custom constellations need an explicit amplitude list".into(),
                ))
            }
        };
        let theta = if kind == ConstellationKind::PskAsym { theta } else { 0.0 };
        Ok(Self {
            label: kind,
            m,
            mean_photon,
            theta,
            amplitudes,
        })
    }

    pub fn custom(amplitudes: Vec<Amplitude>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidConstellation("M must be at least 1".into()));
        }
        if amplitudes.iter().any(|a| !a.is_valid()) {
            return Err(Error::InvalidConstellation("amplitudes must be finite".into()));
        }
        let mean_photon =
            amplitudes.iter().map(|a| a.mean_photon()).sum::<f64>() / amplitudes.len() as f64;
        Ok(Self {
            label: ConstellationKind::Custom,
            m: amplitudes.len(),
            mean_photon,
            theta: 0.0,
            amplitudes,
        })
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.amplitudes.len() != self.m {
            return Err(Error::InvalidConstellation(format!(
                "M = {} but {} amplitudes given",
                self.m,
                self.amplitudes.len()
            )));
        }
        if self.amplitudes.iter().any(|a| !a.is_valid()) {
            return Err(Error::InvalidConstellation("amplitudes must be finite".into()));
        }
        if self.label == ConstellationKind::PskAsym && self.theta == 0.0 {
            return Err(Error::InvalidConstellation("psk-asym requires a nonzero theta".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constellation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Pure-loss channel with transmittance `T`: `α ↦ √T·α`.
    pub fn apply_loss(&self, transmittance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(Error::InvalidTransmittance(transmittance));
        }
        let s = transmittance.sqrt();
        Ok(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|a| Amplitude::new(s * a.re, s * a.im))
                .collect(),
            mean_photon: self.mean_photon * transmittance,
            ..self.clone()
        })
    }

    pub fn gram_matrix(&self) -> GramMatrix {
        let m = self.len();
        let entries = CMat::from_fn(m, m, |i, j| {
            if i == j {
                linalg::ONE
            } else {
                coherent_inner_product(self.amplitudes[i], self.amplitudes[j])
            }
        });
        GramMatrix { entries }
    }

    /// Gram factorization in one step.
    pub fn state_vectors(&self) -> Result<StateVectors> {
        self.gram_matrix().embed()
    }
}

/// State set as named in configuration files: a coherent constellation,
/// or `orthonormal` basis states as an idealized control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateModel {
    Psk {
        m: usize,
        mean_photon: f64,
    },
    PskAsym {
        m: usize,
        mean_photon: f64,
        theta: f64,
    },
    Qam {
        m: usize,
        mean_photon: f64,
    },
    Custom {
        amplitudes: Vec<Amplitude>,
    },
    Orthonormal {
        m: usize,
    },
}

impl StateModel {
    pub fn m(&self) -> usize {
        match self {
            Self::Psk { m, .. } | Self::PskAsym { m, .. } | Self::Qam { m, .. } | Self::Orthonormal { m } => *m,
            Self::Custom { amplitudes } => amplitudes.len(),
        }
    }

    /// The coherent constellation, or `None` for orthonormal states.
    pub fn constellation(&self) -> Result<Option<Constellation>> {
        Ok(Some(match self {
            Self::Psk { m, mean_photon } => Constellation::build("psk", *m, *mean_photon, 0.0)?,
            Self::PskAsym { m, mean_photon, theta } => Constellation::build("psk-asym", *m, *mean_photon, *theta)?,
            Self::Qam { m, mean_photon } => Constellation::build("qam", *m, *mean_photon, 0.0)?,
            Self::Custom { amplitudes } => Constellation::custom(amplitudes.clone())?,
            Self::Orthonormal { .. } => return Ok(None),
        }))
    }

    /// State vectors after a pure-loss channel. Orthonormal states have no
    /// loss model and accept only `T = 1`.
    pub fn states(&self, transmittance: f64) -> Result<StateVectors> {
        match self.constellation()? {
            Some(c) => c.apply_loss(transmittance)?.state_vectors(),
            None => {
                if transmittance != 1.0 {
                    return Err(Error::InvalidTransmittance(transmittance));
                }
                if self.m() == 0 {
                    return Err(Error::InvalidConstellation("M must be at least 1".into()));
                }
                Ok(StateVectors::orthonormal(self.m()))
            }
        }
    }
}

fn qam_grid(m: usize, mean_photon: f64) -> Vec<Amplitude> {
    let side = (m as f64).sqrt().ceil() as usize;
    let mut points: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let (row, col) = (k / side, k % side);
            (col as f64, row as f64)
        })
        .collect();
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p.0, y + p.1));
    let (cx, cy) = (cx / m as f64, cy / m as f64);
    for p in &mut points {
        p.0 -= cx;
        p.1 -= cy;
    }
    let power = points.iter().map(|p| p.0 * p.0 + p.1 * p.1).sum::<f64>() / m as f64;
    let scale = if power > 0.0 { (mean_photon / power).sqrt() } else { 0.0 };
    points
        .into_iter()
        .map(|(x, y)| Amplitude::new(scale * x, scale * y))
        .collect()
}

/// `G_ij = ⟨α_i|α_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: CMat,
}

/// Relative eigenvalue cutoff that decides the numerical rank of a Gram matrix.
pub const RANK_CUTOFF: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

impl GramMatrix {
    pub fn from_entries(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch("Gram matrix must be square".into()));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// True when `G_ij` depends only on `(j − i) mod M`.
    pub fn is_circulant(&self, tol: f64) -> bool {
        let m = self.dim();
        (0..m).all(|i| {
            (0..m).all(|j| (self.entries[(i, j)] - self.entries[(0, (j + m - i) % m)]).norm() <= tol)
        })
    }

    /// Factors `G = V†V` and returns the columns of `V` as state vectors in
    /// a space of dimension equal to the numerical rank.
    pub fn embed(&self) -> Result<StateVectors> {
        let m = self.dim();
        if m == 0 {
            return Err(Error::EmptyProblem("no states".into()));
        }
        let eig = linalg::eigh(&self.entries);
        let lambda_max = eig.values[m - 1];
        if eig.values[0] < -PSD_TOLERANCE * lambda_max.max(1.0) {
            return Err(Error::NotPositiveSemidefinite(eig.values[0]));
        }
        let cut = RANK_CUTOFF * lambda_max;
        // keep the largest eigenvalues first so the basis is ordered by weight
        let kept: Vec<usize> = (0..m).rev().filter(|&k| eig.values[k] > cut).collect();
        if kept.is_empty() {
            return Err(Error::NotPositiveSemidefinite(lambda_max));
        }
        let vectors = (0..m)
            .map(|i| {
                CVec::from_iterator(
                    kept.len(),
                    kept.iter()
                        .map(|&k| eig.vectors[(i, k)].conj() * eig.values[k].sqrt()),
                )
            })
            .collect();
        Ok(StateVectors { vectors })
    }
}

/// Pure states as vectors in their `d ≤ M` dimensional span.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVectors {
    pub vectors: Vec<CVec>,
}

impl StateVectors {
    /// Normalizes and wraps raw vectors.
    pub fn new(vectors: Vec<CVec>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::EmptyProblem("no states".into()));
        };
        let d = first.len();
        if d == 0 || vectors.iter().any(|v| v.len() != d) {
            return Err(Error::DimensionMismatch("state vectors must share a nonzero dimension".into()));
        }
        let vectors = vectors
            .into_iter()
            .map(|v| {
                let n = v.norm();
                if n == 0.0 {
                    Err(Error::InvalidConstellation("zero state vector".into()))
                } else {
                    Ok(v / Complex64::new(n, 0.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { vectors })
    }

    /// `M` orthonormal states in `M` dimensions.
    pub fn orthonormal(m: usize) -> Self {
        Self {
            vectors: (0..m)
                .map(|i| CVec::from_fn(m, |r, _| if r == i { linalg::ONE } else { linalg::ZERO }))
                .collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    /// `ρ_i = |v_i⟩⟨v_i|`.
    pub fn density(&self, i: usize) -> CMat {
        linalg::outer(&self.vectors[i])
    }

    pub fn densities(&self) -> Vec<CMat> {
        (0..self.count()).map(|i| self.density(i)).collect()
    }

    pub fn gram(&self) -> CMat {
        let m = self.count();
        CMat::from_fn(m, m, |i, j| self.vectors[i].dotc(&self.vectors[j]))
    }

    /// Applies a unitary to every vector.
    pub fn rotated(&self, unitary: &CMat) -> Self {
        Self {
            vectors: self.vectors.iter().map(|v| unitary * v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a.re - re).abs() <= tol && (a.im - im).abs() <= tol
    }

    #[test]
    fn inner_product_examples() {
        let a = Amplitude::new(0.3, -0.7);
        assert!(close(coherent_inner_product(a, a), 1.0, 0.0, 1e-15));
        let ip = coherent_inner_product(Amplitude::new(1.0, 0.0), Amplitude::new(-1.0, 0.0));
        assert!(close(ip, (-2.0f64).exp(), 0.0, 1e-15));
        assert!((ip.re - 0.135335).abs() < 1e-6);
        let vac = coherent_inner_product(Amplitude::new(0.0, 0.0), Amplitude::from_polar(1.0, 0.4));
        assert!(close(vac, (-0.5f64).exp(), 0.0, 1e-15));
        assert!((vac.re - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn psk3_phases() {
        let c = Constellation::build("psk", 3, 1.0, 0.0).unwrap();
        let expected = [PI / 2.0, 7.0 * PI / 6.0, 11.0 * PI / 6.0];
        for (a, want) in c.amplitudes.iter().zip(expected) {
            assert!((a.mean_photon() - 1.0).abs() < 1e-14);
            let got = Amplitude::from_polar(1.0, want);
            assert!((a.re - got.re).abs() < 1e-14 && (a.im - got.im).abs() < 1e-14);
        }
    }

    #[test]
    fn psk_asym_offsets_last_phase() {
        let c = Constellation::build("psk-asym", 3, 1.0, 0.2).unwrap();
        let want = Amplitude::from_polar(1.0, 0.2 + 11.0 * PI / 6.0);
        let last = c.amplitudes[2];
        assert!((last.re - want.re).abs() < 1e-14 && (last.im - want.im).abs() < 1e-14);
        assert_eq!(c.theta, 0.2);
        assert!(matches!(
            Constellation::build("psk-asym", 3, 1.0, 0.0),
            Err(Error::InvalidConstellation(_))
        ));
    }

    #[test]
    fn bpsk_is_plus_minus_i() {
        let c = Constellation::build("psk", 2, 1.0, 0.0).unwrap();
        assert!(c.amplitudes[0].re.abs() < 1e-15 && (c.amplitudes[0].im - 1.0).abs() < 1e-15);
        assert!(c.amplitudes[1].re.abs() < 1e-15 && (c.amplitudes[1].im + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(Constellation::build("hex", 3, 1.0, 0.0), Err(Error::UnknownLabel(_))));
        assert!(Constellation::build("psk", 0, 1.0, 0.0).is_err());
        assert!(Constellation::build("psk", 3, -1.0, 0.0).is_err());
        assert!(Constellation::build("custom", 3, 1.0, 0.0).is_err());
    }

    #[test]
    fn qam_average_power() {
        for m in [4, 9, 16, 5] {
            let c = Constellation::build("qam", m, 2.5, 0.0).unwrap();
            let avg = c.amplitudes.iter().map(|a| a.mean_photon()).sum::<f64>() / m as f64;
            assert!((avg - 2.5).abs() < 1e-12, "M={m}: {avg}");
        }
    }

    #[test]
    fn gram_examples() {
        let bpsk = Constellation::build("psk", 2, 1.0, 0.0).unwrap().gram_matrix();
        assert_eq!(bpsk.entries[(0, 0)], linalg::ONE);
        assert_eq!(bpsk.entries[(1, 1)], linalg::ONE);
        assert!(close(bpsk.entries[(0, 1)], (-2.0f64).exp(), 0.0, 1e-15));

        for m in 2..=6 {
            let g = Constellation::build("psk", m, 1.3, 0.0).unwrap().gram_matrix();
            assert!(g.is_circulant(1e-10), "psk M={m}");
        }
        let asym = Constellation::build("psk-asym", 3, 1.0, 0.4).unwrap().gram_matrix();
        assert!(!asym.is_circulant(1e-10));
    }

    #[test]
    fn embed_identity_gives_orthonormal() {
        let g = GramMatrix::from_entries(linalg::identity(3)).unwrap();
        let sv = g.embed().unwrap();
        assert_eq!(sv.dim(), 3);
        assert!(linalg::max_abs(&(sv.gram() - linalg::identity(3))) < 1e-14);
    }

    #[test]
    fn embed_bpsk_two_dimensional() {
        let sv = Constellation::build("psk", 2, 1.0, 0.0).unwrap().state_vectors().unwrap();
        assert_eq!(sv.dim(), 2);
        let s = sv.vectors[0].dotc(&sv.vectors[1]);
        assert!(close(s, (-2.0f64).exp(), 0.0, 1e-12));
    }

    #[test]
    fn embed_duplicate_state_is_rank_deficient() {
        let a = Amplitude::new(0.5, 0.5);
        let c = Constellation::custom(vec![a, Amplitude::new(-0.8, 0.1), a]).unwrap();
        let g = c.gram_matrix();
        let sv = g.embed().unwrap();
        assert_eq!(sv.dim(), 2);
        assert!(linalg::max_abs(&(sv.gram() - &g.entries)) < 1e-10);
    }

    #[test]
    fn embed_rejects_indefinite() {
        let mut e = linalg::identity(2);
        e[(0, 1)] = Complex64::new(2.0, 0.0);
        e[(1, 0)] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            GramMatrix::from_entries(e).unwrap().embed(),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn loss_examples() {
        let c = Constellation::build("psk", 3, 2.0, 0.0).unwrap();
        assert_eq!(c.apply_loss(1.0).unwrap().amplitudes, c.amplitudes);
        let dark = c.apply_loss(0.0).unwrap();
        assert!(dark.amplitudes.iter().all(|a| a.mean_photon() == 0.0));
        let half = c.apply_loss(0.5).unwrap();
        assert!((half.amplitudes[0].mean_photon() - 1.0).abs() < 1e-14);
        assert!(matches!(c.apply_loss(1.5), Err(Error::InvalidTransmittance(_))));
        assert!(c.apply_loss(-0.1).is_err());
    }

    #[test]
    fn all_vacuum_embeds_in_one_dimension() {
        let c = Constellation::build("psk", 3, 1.0, 0.0).unwrap().apply_loss(0.0).unwrap();
        let sv = c.state_vectors().unwrap();
        assert_eq!(sv.dim(), 1);
    }

    #[test]
    fn json_round_trip() {
        let c = Constellation::build("psk-asym", 3, 1.0, 0.3).unwrap();
        let text = c.to_json();
        assert!(text.contains("\"label\": \"psk-asym\""));
        assert_eq!(Constellation::from_json(&text).unwrap(), c);
        assert!(Constellation::from_json(r#"{"label":"psk","m":2,"mean_photon":1,"theta":0,"amplitudes":[]}"#).is_err());
    }

    fn amplitude() -> impl Strategy<Value = Amplitude> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Amplitude::new(re, im))
    }

    proptest! {
        #[test]
        fn gram_round_trip(amps in proptest::collection::vec(amplitude(), 1..6)) {
            let c = Constellation::custom(amps).unwrap();
            let g = c.gram_matrix();
            let sv = g.embed().unwrap();
            prop_assert!(linalg::max_abs(&(sv.gram() - &g.entries)) < 1e-10);
            for v in &sv.vectors {
                prop_assert!((v.norm() - 1.0).abs() < 1e-10);
            }
            prop_assert!(linalg::min_eigenvalue(&g.entries) >= -1e-10);
        }

        #[test]
        fn loss_composes(amps in proptest::collection::vec(amplitude(), 1..5), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let c = Constellation::custom(amps).unwrap();
            let two = c.apply_loss(t1).unwrap().apply_loss(t2).unwrap();
            let one = c.apply_loss(t1 * t2).unwrap();
            for (a, b) in two.amplitudes.iter().zip(&one.amplitudes) {
                prop_assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
            }
        }
    }
}
