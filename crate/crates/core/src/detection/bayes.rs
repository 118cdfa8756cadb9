use super::polish::{active_faces, polish, Model};
use super::{
    conditional_error_matrix, error_probability, hermitian_basis, hermitian_combination,
    risk_operators, DetectionProblem, Measurement,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::sdp::{BlockSdp, Constraint, Ipm, IpmStatus, Iterate};
use num_complex::Complex64;
use serde::Serialize;

/// Interior-point stopping tolerance; the certificate is checked separately.
pub(crate) const IPM_TOL: f64 = 1e-12;
/// Iterations without a better iterate before the interior phase stops.
pub(crate) const PATIENCE: usize = 15;

#[derive(Debug, Clone)]
pub struct BayesSolution {
    pub measurement: Measurement,
    /// `Σ_j Tr W_j Π_j`.
    pub bayes_risk: f64,
    /// `1 − Σ_i ξ_i Tr ρ_i Π_i`.
    pub error_probability: f64,
    pub optimality_residual: f64,
    pub report: OptimalityReport,
    pub iterations: usize,
    pub converged: bool,
}

/// Residuals of the Bayes optimality conditions, per decision index `j`.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    /// `max_abs((W_j − Γ) Π_j)`.
    pub complementarity: Vec<f64>,
    /// `max_i max_abs(Π_j (W_i − W_j) Π_i)`.
    pub cross: Vec<f64>,
    /// `λ_min(W_j − Γ)`.
    pub min_eigenvalue: Vec<f64>,
    /// `max_abs(Γ − Γ†) / 2`, removed before the eigenvalue test.
    pub gamma_asymmetry: f64,
    pub completeness_residual: f64,
    pub positivity_residual: f64,
}

impl OptimalityReport {
    /// Largest violation over all conditions, including POVM validity.
    pub fn residual(&self) -> f64 {
        let comp = self.complementarity.iter().copied().fold(0.0, f64::max);
        let cross = self.cross.iter().copied().fold(0.0, f64::max);
        let eig = self.min_eigenvalue.iter().map(|v| -v).fold(0.0, f64::max);
        comp.max(cross)
            .max(eig)
            .max(self.gamma_asymmetry)
            .max(self.completeness_residual)
            .max(self.positivity_residual)
    }

    pub fn certified(&self, tol: f64) -> bool {
        self.residual() <= tol
    }
}

/// Evaluates the Bayes optimality conditions for `m` on problem `p`.
pub fn check_bayes_optimality(m: &Measurement, p: &DetectionProblem) -> Result<OptimalityReport> {
    if m.len() != p.m() || m.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVM has {} elements of dimension {}, problem has {} states in dimension {}",
            m.len(),
            m.dim(),
            p.m(),
            p.dim()
        )));
    }
    let w = risk_operators(p);
    Ok(report_from(&w, m))
}

fn report_from(w: &[CMat], m: &Measurement) -> OptimalityReport {
    let d = m.dim();
    let mut gamma = CMat::zeros(d, d);
    for (wj, pj) in w.iter().zip(&m.operators) {
        gamma += wj * pj;
    }
    let gamma_asymmetry = linalg::max_abs(&(&gamma - gamma.adjoint())) / 2.0;
    let gamma = linalg::hermitian_part(&gamma);
    let shifted: Vec<CMat> = w.iter().map(|wj| wj - &gamma).collect();
    let complementarity = shifted
        .iter()
        .zip(&m.operators)
        .map(|(s, pj)| linalg::max_abs(&(s * pj)).max(linalg::max_abs(&(pj * s))))
        .collect();
    let min_eigenvalue = shifted.iter().map(linalg::min_eigenvalue).collect();
    let cross = (0..m.len())
        .map(|j| {
            (0..m.len())
                .map(|i| linalg::max_abs(&(&m.operators[j] * (&w[i] - &w[j]) * &m.operators[i])))
                .fold(0.0, f64::max)
        })
        .collect();
    OptimalityReport {
        complementarity,
        cross,
        min_eigenvalue,
        gamma_asymmetry,
        completeness_residual: m.completeness_residual,
        positivity_residual: m.positivity_residual,
    }
}

/// `minimize Σ_j ⟨W_j, Π_j⟩  s.t.  Σ_j Π_j = I,  Π_j ⪰ 0`.
fn bayes_sdp(w: &[CMat], d: usize) -> BlockSdp {
    let m = w.len();
    let constraints = hermitian_basis(d)
        .into_iter()
        .enumerate()
        .map(|(k, e)| Constraint {
            terms: (0..m).map(|j| (j, e.clone())).collect(),
            rhs: if k < d { 1.0 } else { 0.0 },
        })
        .collect();
    BlockSdp {
        block_dims: vec![d; m],
        objective: w.to_vec(),
        constraints,
    }
}

/// Strictly feasible start: `Π_j = I/M`, `Y = (min_j λ_min(W_j) − 1) I`.
fn feasible_start(w: &[CMat], d: usize) -> Iterate {
    let m = w.len();
    let floor = w.iter().map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min) - 1.0;
    let x = vec![linalg::identity(d) * Complex64::new(1.0 / m as f64, 0.0); m];
    let z = w
        .iter()
        .map(|wj| linalg::hermitian_part(&(wj - linalg::identity(d) * Complex64::new(floor, 0.0))))
        .collect();
    let mut y = vec![0.0; d * d];
    y[..d].fill(floor);
    Iterate { x, z, y }
}

/// Iterate selection: among certified iterates the one with the smallest
/// interior-point merit (most accurate objective) wins; otherwise the one
/// with the smallest residual.
pub(crate) fn prefer(
    report: &OptimalityReport,
    merit: f64,
    incumbent: Option<(&OptimalityReport, f64)>,
    tol: f64,
) -> bool {
    let Some((best, best_merit)) = incumbent else {
        return true;
    };
    match (report.certified(tol), best.certified(tol)) {
        (true, true) => merit <= best_merit,
        (true, false) => true,
        (false, true) => false,
        (false, false) => report.residual() <= best.residual(),
    }
}

/// Bayes-optimal POVM for `p`.
///
/// Runs a primal-dual interior-point method, picks an iterate by
/// [`prefer`], then refines it by Newton's method on its active face. When
/// the residual still exceeds `tol` after `max_iter` iterations the best
/// measurement found is returned with `converged = false`.
pub fn bayes_solve(p: &DetectionProblem, tol: f64, max_iter: usize) -> Result<BayesSolution> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let d = p.dim();
    let w = risk_operators(p);
    let sdp = bayes_sdp(&w, d);
    let mut ipm = Ipm::with_start(&sdp, IPM_TOL, feasible_start(&w, d));

    let mut best: Option<(Measurement, OptimalityReport, f64, Iterate)> = None;
    let mut since_best = 0;
    loop {
        let m = Measurement::from_near_complete(&ipm.iterate().x)?;
        let report = report_from(&w, &m);
        let merit = ipm.diagnostics().merit();
        since_best += 1;
        if prefer(&report, merit, best.as_ref().map(|(_, r, s, _)| (r, *s)), tol) {
            best = Some((m, report, merit, ipm.iterate().clone()));
            since_best = 0;
        }
        if ipm.status() != IpmStatus::Running || ipm.iterations() >= max_iter || since_best > PATIENCE {
            break;
        }
        ipm.step();
    }
    let (mut measurement, mut report, _, start) = best.expect("at least one iterate");
    let cost: Vec<Vec<f64>> = (0..p.m()).map(|j| (0..p.m()).map(|i| p.cost.get(j, i)).collect()).collect();
    let rho = p.states.densities();
    let model = Model {
        rho: &rho,
        cost: &cost,
        prior: p.prior.weights().to_vec(),
        free_support: None,
    };
    let y = hermitian_combination(d, &start.y);
    for face in active_faces(&start.x, &start.z) {
        if report.residual() < 1e-14 {
            break;
        }
        let Some(refined) = polish(&model, face, y.clone(), 0.0) else {
            continue;
        };
        if let Ok(m) = Measurement::from_near_complete(&refined.operators) {
            let r = report_from(&w, &m);
            if r.residual() < report.residual() {
                measurement = m;
                report = r;
            }
        }
    }
    let channel = conditional_error_matrix(&measurement, &p.states)?;
    let bayes_risk = w
        .iter()
        .zip(&measurement.operators)
        .map(|(wj, pj)| linalg::trace_product(wj, pj))
        .sum();
    let optimality_residual = report.residual();
    Ok(BayesSolution {
        error_probability: error_probability(&channel, &p.prior).clamp(0.0, 1.0),
        bayes_risk,
        optimality_residual,
        converged: optimality_residual <= tol,
        report,
        iterations: ipm.iterations(),
        measurement,
    })
}
