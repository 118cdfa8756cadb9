//! Newton refinement of an interior-point solution on its active face.
//!
//! Interior-point iterates lose accuracy near the boundary of the cone, so
//! the final digits are recovered by solving the optimality equations
//! directly. With `Π_j = V_j V_j†` (`V_j` spanning the active eigenspace of
//! the interior iterate) and a Hermitian multiplier `Y`, the equations are
//!
//! ```text
//! (W_j(ξ) − Y) V_j = 0,   Σ_j V_j V_j† = I
//! ```
//!
//! and, when the prior is free on a support `S`,
//! `r_i(Π) = t` for `i ∈ S` and `Σ_{i∈S} ξ_i = 1`. Every equation is at most
//! quadratic in the unknowns, so central differences give the exact
//! Jacobian; the system is solved by Gauss-Newton with minimum-norm steps,
//! which absorbs the unitary gauge freedom of each `V_j`.

use crate::linalg::{self, CMat};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const MAX_STEPS: usize = 30;
const DIFF_STEP: f64 = 0.5;
const MAX_HALVINGS: usize = 8;

pub(crate) struct Model<'a> {
    pub rho: &'a [CMat],
    /// `cost[j][i]`: deciding `j` when `i` is true.
    pub cost: &'a [Vec<f64>],
    pub prior: Vec<f64>,
    /// Support of the prior when it is an unknown; `None` keeps it fixed.
    pub free_support: Option<Vec<usize>>,
}

pub(crate) struct Polished {
    pub operators: Vec<CMat>,
    pub prior: Vec<f64>,
}

struct Layout {
    d: usize,
    ranks: Vec<usize>,
    support: Vec<usize>,
    free: bool,
}

impl Layout {
    fn v_len(&self) -> usize {
        self.ranks.iter().map(|r| 2 * self.d * r).sum()
    }
    fn unknowns(&self) -> usize {
        self.v_len() + self.d * self.d + if self.free { self.support.len() + 1 } else { 0 }
    }
}

fn pack_hermitian(h: &CMat, out: &mut Vec<f64>) {
    let d = h.nrows();
    for a in 0..d {
        out.push(h[(a, a)].re);
    }
    for a in 0..d {
        for b in a + 1..d {
            out.push(h[(a, b)].re);
            out.push(h[(a, b)].im);
        }
    }
}

fn unpack_hermitian(d: usize, u: &[f64]) -> CMat {
    let mut h = CMat::zeros(d, d);
    for a in 0..d {
        h[(a, a)] = Complex64::new(u[a], 0.0);
    }
    let mut k = d;
    for a in 0..d {
        for b in a + 1..d {
            let z = Complex64::new(u[k], u[k + 1]);
            h[(a, b)] = z;
            h[(b, a)] = z.conj();
            k += 2;
        }
    }
    h
}

struct Point {
    v: Vec<CMat>,
    y: CMat,
    prior: Vec<f64>,
    t: f64,
}

fn unpack(layout: &Layout, model: &Model, u: &[f64]) -> Point {
    let d = layout.d;
    let mut k = 0;
    let v = layout
        .ranks
        .iter()
        .map(|&r| {
            let mut vj = CMat::zeros(d, r);
            for c in 0..r {
                for a in 0..d {
                    vj[(a, c)] = Complex64::new(u[k], u[k + 1]);
                    k += 2;
                }
            }
            vj
        })
        .collect();
    let y = unpack_hermitian(d, &u[k..k + d * d]);
    k += d * d;
    let mut prior = model.prior.clone();
    let mut t = 0.0;
    if layout.free {
        prior.iter_mut().for_each(|p| *p = 0.0);
        for &i in &layout.support {
            prior[i] = u[k];
            k += 1;
        }
        t = u[k];
    }
    Point { v, y, prior, t }
}

fn pack(layout: &Layout, p: &Point) -> Vec<f64> {
    let mut u = Vec::with_capacity(layout.unknowns());
    for vj in &p.v {
        for c in 0..vj.ncols() {
            for a in 0..layout.d {
                u.push(vj[(a, c)].re);
                u.push(vj[(a, c)].im);
            }
        }
    }
    pack_hermitian(&p.y, &mut u);
    if layout.free {
        u.extend(layout.support.iter().map(|&i| p.prior[i]));
        u.push(p.t);
    }
    u
}

fn residual(layout: &Layout, model: &Model, u: &[f64]) -> Vec<f64> {
    let d = layout.d;
    let p = unpack(layout, model, u);
    let m = model.rho.len();
    let mut out = Vec::new();
    let mut total = -linalg::identity(d);
    for (j, vj) in p.v.iter().enumerate() {
        if vj.ncols() == 0 {
            continue;
        }
        let mut wj = -&p.y;
        for (i, r) in model.rho.iter().enumerate() {
            let c = p.prior[i] * model.cost[j][i];
            if c != 0.0 {
                wj += r * Complex64::new(c, 0.0);
            }
        }
        let e = wj * vj;
        for c in 0..e.ncols() {
            for a in 0..d {
                out.push(e[(a, c)].re);
                out.push(e[(a, c)].im);
            }
        }
        total += vj * vj.adjoint();
    }
    pack_hermitian(&total, &mut out);
    if layout.free {
        let pis: Vec<CMat> = p.v.iter().map(|vj| vj * vj.adjoint()).collect();
        for &i in &layout.support {
            let risk: f64 = (0..m)
                .map(|j| model.cost[j][i] * linalg::trace_product(&model.rho[i], &pis[j]))
                .sum();
            out.push(risk - p.t);
        }
        out.push(layout.support.iter().map(|&i| p.prior[i]).sum::<f64>() - 1.0);
    }
    out
}

/// Anti-Hermitian part of `V_j† Δ_j` for every block, a linear function of
/// the displacement `Δ`; pinning it to zero removes the `V_j → V_j U_j`
/// gauge directions from the Newton step.
fn gauge_rows(layout: &Layout, v: &[CMat]) -> DMatrix<f64> {
    let d = layout.d;
    let rows: usize = layout.ranks.iter().map(|r| r * r).sum();
    let mut g = DMatrix::<f64>::zeros(rows, layout.unknowns());
    let (mut col, mut row) = (0, 0);
    for vj in v {
        let r = vj.ncols();
        for c in 0..r {
            for a in 0..d {
                for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                    let mut delta = CMat::zeros(d, r);
                    delta[(a, c)] = unit;
                    let mv = vj.adjoint() * delta;
                    let anti = &mv - mv.adjoint();
                    let mut k = row;
                    for p in 0..r {
                        g[(k, col)] = anti[(p, p)].im;
                        k += 1;
                    }
                    for p in 0..r {
                        for q in p + 1..r {
                            g[(k, col)] = anti[(p, q)].re;
                            g[(k + 1, col)] = anti[(p, q)].im;
                            k += 2;
                        }
                    }
                    col += 1;
                }
            }
        }
        row += r * r;
    }
    g
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

const RELATIVE_THRESHOLDS: [f64; 3] = [1e-3, 1e-6, 1e-9];

fn factor(eig: &linalg::HermitianEigen, keep: impl Fn(usize) -> bool) -> CMat {
    let cols: Vec<usize> = (0..eig.values.len()).filter(|&c| keep(c)).collect();
    let mut f = CMat::zeros(eig.values.len(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        let s = eig.values[c].max(0.0).sqrt();
        f.set_column(k, &(eig.vectors.column(c) * Complex64::new(s, 0.0)));
    }
    f
}

/// Candidate active faces of a primal iterate, as factors `V_j` with
/// `X_j ≈ V_j V_j†`. An eigenvector of `X_j` is active when its `X`
/// weight exceeds its `Z` weight, or, alternatively, when its eigenvalue
/// clears a fixed fraction of the largest one. Duplicate rank patterns are
/// dropped.
pub(crate) fn active_faces(x: &[CMat], z: &[CMat]) -> Vec<Vec<CMat>> {
    let eigs: Vec<linalg::HermitianEigen> = x.iter().map(|xj| linalg::eigh(&linalg::hermitian_part(xj))).collect();
    let top = eigs
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .fold(0.0, f64::max);
    let mut faces: Vec<Vec<CMat>> = vec![eigs
        .iter()
        .zip(z)
        .map(|(e, zj)| {
            factor(e, |c| {
                let v = e.vectors.column(c).into_owned();
                e.values[c] > linalg::expectation(zj, &v).max(0.0)
            })
        })
        .collect()];
    for tau in RELATIVE_THRESHOLDS {
        faces.push(eigs.iter().map(|e| factor(e, |c| e.values[c] > tau * top)).collect());
    }
    let mut seen = Vec::new();
    faces.retain(|f| {
        let ranks: Vec<usize> = f.iter().map(|v| v.ncols()).collect();
        if seen.contains(&ranks) {
            false
        } else {
            seen.push(ranks);
            true
        }
    });
    faces
}

/// Refines `(V, Y, ξ, t)`; returns `None` when the Newton iteration fails
/// to reduce the equation residual.
pub(crate) fn polish(model: &Model, factors: Vec<CMat>, y: CMat, t: f64) -> Option<Polished> {
    let d = y.nrows();
    let layout = Layout {
        d,
        ranks: factors.iter().map(|f| f.ncols()).collect(),
        support: model.free_support.clone().unwrap_or_default(),
        free: model.free_support.is_some(),
    };
    let start = Point {
        v: factors,
        y,
        prior: model.prior.clone(),
        t,
    };
    let mut u = pack(&layout, &start);
    let n = u.len();
    let mut f = residual(&layout, model, &u);
    let start_norm = sup_norm(&f);
    let mut norm = start_norm;
    for _ in 0..MAX_STEPS {
        if norm < 1e-15 {
            break;
        }
        let gauge = gauge_rows(&layout, &unpack(&layout, model, &u).v);
        let mut jac = DMatrix::<f64>::zeros(f.len() + gauge.nrows(), n);
        jac.rows_mut(f.len(), gauge.nrows()).copy_from(&gauge);
        for k in 0..n {
            let mut up = u.clone();
            up[k] += DIFF_STEP;
            let mut dn = u.clone();
            dn[k] -= DIFF_STEP;
            let (fp, fm) = (residual(&layout, model, &up), residual(&layout, model, &dn));
            for (r, (a, b)) in fp.iter().zip(&fm).enumerate() {
                jac[(r, k)] = (a - b) / (2.0 * DIFF_STEP);
            }
        }
        let svd = jac.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let mut rhs = DVector::zeros(f.len() + gauge.nrows());
        rhs.rows_mut(0, f.len()).copy_from_slice(&f);
        let step = svd.solve(&rhs, cutoff).ok()?;
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a - scale * s).collect();
            let ft = residual(&layout, model, &trial);
            let nt = sup_norm(&ft);
            if nt < norm {
                u = trial;
                f = ft;
                norm = nt;
                accepted = true;
                break;
            }
            scale /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if norm.is_nan() || start_norm.is_nan() || norm >= start_norm {
        return None;
    }
    let p = unpack(&layout, model, &u);
    Some(Polished {
        operators: p.v.iter().map(|vj| vj * vj.adjoint()).collect(),
        prior: p.prior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_packing_round_trips() {
        let mut h = CMat::zeros(3, 3);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        h[(1, 2)] = Complex64::new(0.3, -0.7);
        h[(2, 1)] = Complex64::new(0.3, 0.7);
        h[(2, 2)] = Complex64::new(-2.0, 0.0);
        let mut u = Vec::new();
        pack_hermitian(&h, &mut u);
        assert_eq!(u.len(), 9);
        assert_eq!(unpack_hermitian(3, &u), h);
    }

    #[test]
    fn active_factors_follow_complementarity() {
        let x = vec![CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.9, 0.0),
            Complex64::new(1e-9, 0.0),
        ]))];
        let z = vec![CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1e-9, 0.0),
            Complex64::new(0.5, 0.0),
        ]))];
        let faces = active_faces(&x, &z);
        assert_eq!(faces[0][0].ncols(), 1);
        assert!(((faces[0][0].adjoint() * &faces[0][0])[(0, 0)].re - 0.9).abs() < 1e-15);
        assert!(faces.iter().any(|f| f[0].ncols() == 2));
    }
}
