//! Primal-dual interior-point solver for small block-diagonal Hermitian
//! semidefinite programs.
//!
//! Primal:  minimize  Σ_b ⟨C_b, X_b⟩
//!          subject to Σ_b ⟨A_kb, X_b⟩ = b_k,  X_b ⪰ 0
//! Dual:    maximize  bᵀy
//!          subject to Z_b = C_b − Σ_k y_k A_kb ⪰ 0
//!
//! Blocks are complex Hermitian; a 1×1 block is a nonnegative scalar, which
//! is how linear inequality slacks enter. The search direction is the
//! HKM (X Z⁻¹ scaled) direction with a Mehrotra predictor-corrector. The
//! start point is infeasible unless one is supplied.

use crate::linalg::{self, CMat};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// One linear equality constraint: a sparse list of `(block, A_kb)` terms.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(usize, CMat)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct BlockSdp {
    pub block_dims: Vec<usize>,
    pub objective: Vec<CMat>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Running,
    Converged,
    /// Step lengths collapsed or the Schur system became singular.
    Stalled,
}

/// Primal-dual iterate.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub x: Vec<CMat>,
    pub z: Vec<CMat>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmDiagnostics {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub mu: f64,
}

impl IpmDiagnostics {
    /// `μ` plus both infeasibilities; smaller is a more accurate iterate.
    pub fn merit(&self) -> f64 {
        self.mu.abs() + self.primal_infeasibility + self.dual_infeasibility
    }
}

pub struct Ipm<'a> {
    problem: &'a BlockSdp,
    iterate: Iterate,
    tol: f64,
    order: usize,
    b_norm: f64,
    c_norm: f64,
    iterations: usize,
    status: IpmStatus,
}

const STEP_FRACTION: f64 = 0.98;
const MIN_STEP: f64 = 1e-12;

impl BlockSdp {
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// `A(X)` as a vector of constraint values.
    pub fn apply(&self, x: &[CMat]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                c.terms
                    .iter()
                    .map(|(b, a)| linalg::trace_product(a, &x[*b]))
                    .sum()
            })
            .collect()
    }

    /// `Σ_k y_k A_k` block by block.
    pub fn adjoint(&self, y: &[f64]) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.block_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (c, &yk) in self.constraints.iter().zip(y) {
            if yk == 0.0 {
                continue;
            }
            for (b, a) in &c.terms {
                out[*b] += a * Complex64::new(yk, 0.0);
            }
        }
        out
    }

    pub fn primal_objective(&self, x: &[CMat]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(c, x)| linalg::trace_product(c, x))
            .sum()
    }

    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        self.constraints.iter().zip(y).map(|(c, yk)| c.rhs * yk).sum()
    }
}

fn inner(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(a, b)| linalg::trace_product(a, b)).sum()
}

fn frobenius(a: &[CMat]) -> f64 {
    a.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn step_limit(x: &[CMat], dx: &[CMat]) -> f64 {
    x.iter()
        .zip(dx)
        .map(|(x, d)| linalg::max_psd_step(x, d))
        .fold(f64::INFINITY, f64::min)
}

impl<'a> Ipm<'a> {
    /// Starts from scaled identities `X = I`, `Z = (1 + max‖C_b‖) I`, `y = 0`.
    pub fn new(problem: &'a BlockSdp, tol: f64) -> Self {
        let c_scale = 1.0
            + problem
                .objective
                .iter()
                .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
        let x = problem.block_dims.iter().map(|&n| linalg::identity(n)).collect();
        let z = problem
            .block_dims
            .iter()
            .map(|&n| linalg::identity(n) * Complex64::new(c_scale, 0.0))
            .collect();
        let y = vec![0.0; problem.num_constraints()];
        Self::with_start(problem, tol, Iterate { x, z, y })
    }

    pub fn with_start(problem: &'a BlockSdp, tol: f64, start: Iterate) -> Self {
        let rhs: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
        Self {
            problem,
            iterate: start,
            tol,
            order: problem.block_dims.iter().sum(),
            b_norm: l2(&rhs),
            c_norm: frobenius(&problem.objective),
            iterations: 0,
            status: IpmStatus::Running,
        }
    }

    pub fn iterate(&self) -> &Iterate {
        &self.iterate
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn status(&self) -> IpmStatus {
        self.status
    }

    fn residuals(&self) -> (Vec<f64>, Vec<CMat>) {
        let p = self.problem;
        let it = &self.iterate;
        let ax = p.apply(&it.x);
        let rp: Vec<f64> = p.constraints.iter().zip(&ax).map(|(c, v)| c.rhs - v).collect();
        let aty = p.adjoint(&it.y);
        let rd: Vec<CMat> = p
            .objective
            .iter()
            .zip(&it.z)
            .zip(&aty)
            .map(|((c, z), a)| linalg::hermitian_part(&(c - z - a)))
            .collect();
        (rp, rd)
    }

    pub fn diagnostics(&self) -> IpmDiagnostics {
        let (rp, rd) = self.residuals();
        IpmDiagnostics {
            primal_objective: self.problem.primal_objective(&self.iterate.x),
            dual_objective: self.problem.dual_objective(&self.iterate.y),
            primal_infeasibility: l2(&rp) / (1.0 + self.b_norm),
            dual_infeasibility: frobenius(&rd) / (1.0 + self.c_norm),
            mu: inner(&self.iterate.x, &self.iterate.z) / self.order as f64,
        }
    }

    fn converged(&self, d: &IpmDiagnostics) -> bool {
        let gap = (d.primal_objective - d.dual_objective).abs()
            / (1.0 + d.primal_objective.abs() + d.dual_objective.abs());
        gap <= self.tol
            && d.mu <= self.tol
            && d.primal_infeasibility <= self.tol
            && d.dual_infeasibility <= self.tol
    }

    /// Solves for `(ΔX, Δy, ΔZ)` with complementarity target `T` per block:
    /// `ΔX = T Z⁻¹ − X − X ΔZ Z⁻¹` (then Hermitian part).
    fn direction(
        &self,
        schur: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        zinv: &[CMat],
        rp: &[f64],
        rd: &[CMat],
        target: &[CMat],
    ) -> (Vec<CMat>, Vec<f64>, Vec<CMat>) {
        let p = self.problem;
        let it = &self.iterate;
        // G = T Z⁻¹ − X − X R_d Z⁻¹
        let g: Vec<CMat> = (0..it.x.len())
            .map(|b| &target[b] * &zinv[b] - &it.x[b] - &it.x[b] * &rd[b] * &zinv[b])
            .collect();
        let ag = p.apply(&g);
        let rhs = DVector::from_iterator(rp.len(), rp.iter().zip(&ag).map(|(r, a)| r - a));
        let dy = schur.solve(&rhs);
        let dy: Vec<f64> = dy.iter().copied().collect();
        let atdy = p.adjoint(&dy);
        let dz: Vec<CMat> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
        let dx: Vec<CMat> = (0..it.x.len())
            .map(|b| {
                let raw = &target[b] * &zinv[b] - &it.x[b] - &it.x[b] * &dz[b] * &zinv[b];
                linalg::hermitian_part(&raw)
            })
            .collect();
        (dx, dy, dz)
    }

    /// One predictor-corrector iteration. Returns the status afterwards.
    pub fn step(&mut self) -> IpmStatus {
        if self.status != IpmStatus::Running {
            return self.status;
        }
        let d = self.diagnostics();
        if self.converged(&d) {
            self.status = IpmStatus::Converged;
            return self.status;
        }
        let p = self.problem;
        let nb = p.block_dims.len();
        let m = p.num_constraints();
        let (rp, rd) = self.residuals();

        let mut zinv = Vec::with_capacity(nb);
        for z in &self.iterate.z {
            match linalg::hpd_inverse(z) {
                Some(inv) => zinv.push(inv),
                None => {
                    self.status = IpmStatus::Stalled;
                    return self.status;
                }
            }
        }

        // Schur complement M_kl = ⟨A_k, X A_l Z⁻¹⟩.
        let mut xaz: Vec<Vec<(usize, CMat)>> = Vec::with_capacity(m);
        for c in &p.constraints {
            xaz.push(
                c.terms
                    .iter()
                    .map(|(b, a)| (*b, &self.iterate.x[*b] * a * &zinv[*b]))
                    .collect(),
            );
        }
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (k, ck) in p.constraints.iter().enumerate() {
            for (l, gl) in xaz.iter().enumerate().skip(k) {
                let mut v = 0.0;
                for (bk, ak) in &ck.terms {
                    for (bl, g) in gl {
                        if bk == bl {
                            v += linalg::trace_product(ak, g);
                        }
                    }
                }
                schur[(k, l)] = v;
                schur[(l, k)] = v;
            }
        }
        let Some(schur) = nalgebra::Cholesky::new(schur) else {
            self.status = IpmStatus::Stalled;
            return self.status;
        };

        let mu = d.mu;
        let zeros: Vec<CMat> = p.block_dims.iter().map(|&n| CMat::zeros(n, n)).collect();

        // predictor
        let (dx_a, _, dz_a) = self.direction(&schur, &zinv, &rp, &rd, &zeros);
        let ap = (STEP_FRACTION * step_limit(&self.iterate.x, &dx_a)).min(1.0);
        let ad = (STEP_FRACTION * step_limit(&self.iterate.z, &dz_a)).min(1.0);
        let x_aff: Vec<CMat> = self.iterate.x.iter().zip(&dx_a).map(|(x, d)| x + d * Complex64::new(ap, 0.0)).collect();
        let z_aff: Vec<CMat> = self.iterate.z.iter().zip(&dz_a).map(|(z, d)| z + d * Complex64::new(ad, 0.0)).collect();
        let mu_aff = inner(&x_aff, &z_aff) / self.order as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector: T = σμ I − ΔX_aff ΔZ_aff
        let target: Vec<CMat> = (0..nb)
            .map(|b| {
                linalg::identity(p.block_dims[b]) * Complex64::new(sigma * mu, 0.0) - &dx_a[b] * &dz_a[b]
            })
            .collect();
        let (dx, dy, dz) = self.direction(&schur, &zinv, &rp, &rd, &target);
        let ap = (STEP_FRACTION * step_limit(&self.iterate.x, &dx)).min(1.0);
        let ad = (STEP_FRACTION * step_limit(&self.iterate.z, &dz)).min(1.0);
        if ap < MIN_STEP && ad < MIN_STEP {
            self.status = IpmStatus::Stalled;
            return self.status;
        }
        let (ap_c, ad_c) = (Complex64::new(ap, 0.0), Complex64::new(ad, 0.0));
        for b in 0..nb {
            self.iterate.x[b] = linalg::hermitian_part(&(&self.iterate.x[b] + &dx[b] * ap_c));
            self.iterate.z[b] = linalg::hermitian_part(&(&self.iterate.z[b] + &dz[b] * ad_c));
        }
        for (y, d) in self.iterate.y.iter_mut().zip(&dy) {
            *y += ad * d;
        }
        self.iterations += 1;
        self.status
    }

    /// Runs until convergence, stall, or `max_iter` iterations.
    pub fn run(&mut self, max_iter: usize) -> IpmStatus {
        while self.status == IpmStatus::Running && self.iterations < max_iter {
            self.step();
        }
        if self.status == IpmStatus::Running {
            let d = self.diagnostics();
            if self.converged(&d) {
                self.status = IpmStatus::Converged;
            }
        }
        self.status
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, Complex64::new(v, 0.0))
    }

    #[test]
    fn linear_program_in_scalar_blocks() {
        // minimize x0 + 2 x1  s.t. x0 + x1 = 1, x ≥ 0  →  x = (1, 0), value 1
        let sdp = BlockSdp {
            block_dims: vec![1, 1],
            objective: vec![scalar(1.0), scalar(2.0)],
            constraints: vec![Constraint {
                terms: vec![(0, scalar(1.0)), (1, scalar(1.0))],
                rhs: 1.0,
            }],
        };
        let mut ipm = Ipm::new(&sdp, 1e-12);
        assert_eq!(ipm.run(100), IpmStatus::Converged);
        let x = &ipm.iterate().x;
        assert!((x[0][(0, 0)].re - 1.0).abs() < 1e-9);
        assert!(x[1][(0, 0)].re.abs() < 1e-9);
        assert!((ipm.iterate().y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn min_eigenvalue_as_sdp() {
        // minimize ⟨C, X⟩ s.t. Tr X = 1, X ⪰ 0  →  λ_min(C)
        let c = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(0.0, -2.0),
                Complex64::new(-1.0, 0.0),
            ],
        );
        let expected = linalg::min_eigenvalue(&c);
        let sdp = BlockSdp {
            block_dims: vec![2],
            objective: vec![c],
            constraints: vec![Constraint {
                terms: vec![(0, linalg::identity(2))],
                rhs: 1.0,
            }],
        };
        let mut ipm = Ipm::new(&sdp, 1e-13);
        assert_eq!(ipm.run(100), IpmStatus::Converged);
        let d = ipm.diagnostics();
        assert!((d.primal_objective - expected).abs() < 1e-10, "{d:?} vs {expected}");
    }
}
