//! Minimax detection: the POVM minimizing the worst conditional risk, and
//! the least-favorable prior at which it is Bayes-optimal.
//!
//! The game `min_Π max_ξ Σ_i ξ_i r_i(Π)` is solved as one SDP in epigraph
//! form:
//!
//! ```text
//! minimize t   s.t.  r_i(Π) + s_i = t,  s_i ≥ 0,  Σ_j Π_j = I,  Π_j ⪰ 0
//! ```
//!
//! The multipliers of the risk constraints are the worst-case prior, and
//! complementary slackness makes the conditional risks equal on its support.

use super::bayes::{check_bayes_optimality, prefer, IPM_TOL, PATIENCE};
use super::polish::{active_faces, polish, Model};
use super::{
    bayes_solve, conditional_error_matrix, conditional_risks, hermitian_basis, hermitian_combination, CostMatrix,
    DetectionProblem, Measurement, OptimalityReport, PriorDistribution, DEFAULT_MAX_ITER,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::sdp::{BlockSdp, Constraint, Ipm, IpmStatus, Iterate};
use crate::states::StateVectors;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Prior weights above this count as support of the worst-case prior.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    pub worst_prior: PriorDistribution,
    pub measurement: Measurement,
    /// Bayes risk of `measurement` at `worst_prior` (error probability under 0/1 costs).
    pub value: f64,
    /// Spread of conditional risks over the support of `worst_prior`.
    pub equal_error_spread: f64,
    /// Spread of conditional risks over all states.
    pub full_spread: f64,
    pub conditional_risks: Vec<f64>,
    /// Bayes optimality residual of `measurement` at `worst_prior`.
    pub bayes_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn support_spread(risks: &[f64], prior: &PriorDistribution) -> f64 {
    spread(
        risks
            .iter()
            .zip(prior.weights())
            .filter(|(_, &w)| w > SUPPORT_THRESHOLD)
            .map(|(r, _)| *r),
    )
}

struct Layout {
    m: usize,
    d: usize,
}

impl Layout {
    fn slack(&self, i: usize) -> usize {
        self.m + i
    }
    fn epigraph(&self) -> usize {
        2 * self.m
    }
    fn risk_row(&self, i: usize) -> usize {
        self.d * self.d + i
    }
}

fn scalar(v: f64) -> CMat {
    CMat::from_element(1, 1, Complex64::new(v, 0.0))
}

/// Costs shifted so every entry is at least one; conditional risks move by
/// the same constant, which keeps the epigraph variable strictly positive.
fn shifted_costs(cost: &CostMatrix) -> (Vec<Vec<f64>>, f64) {
    let m = cost.len();
    let shift = 1.0 - cost.min_entry();
    let c = (0..m)
        .map(|j| (0..m).map(|i| cost.get(j, i) + shift).collect())
        .collect();
    (c, shift)
}

fn minimax_sdp(states: &StateVectors, cost: &[Vec<f64>], layout: &Layout) -> BlockSdp {
    let Layout { m, d } = *layout;
    let rho = states.densities();
    let mut block_dims = vec![d; m];
    block_dims.extend(std::iter::repeat_n(1, m + 1));
    let mut objective: Vec<CMat> = block_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
    objective[layout.epigraph()] = scalar(1.0);

    let mut constraints: Vec<Constraint> = hermitian_basis(d)
        .into_iter()
        .enumerate()
        .map(|(k, e)| Constraint {
            terms: (0..m).map(|j| (j, e.clone())).collect(),
            rhs: if k < d { 1.0 } else { 0.0 },
        })
        .collect();
    for (i, r) in rho.iter().enumerate() {
        let mut terms: Vec<(usize, CMat)> = (0..m)
            .map(|j| (j, r * Complex64::new(cost[j][i], 0.0)))
            .collect();
        terms.push((layout.slack(i), scalar(1.0)));
        terms.push((layout.epigraph(), scalar(-1.0)));
        constraints.push(Constraint { terms, rhs: 0.0 });
    }
    BlockSdp {
        block_dims,
        objective,
        constraints,
    }
}

fn feasible_start(states: &StateVectors, cost: &[Vec<f64>], layout: &Layout) -> Iterate {
    let Layout { m, d } = *layout;
    let rho = states.densities();
    let risk: Vec<f64> = (0..m).map(|i| (0..m).map(|j| cost[j][i]).sum::<f64>() / m as f64).collect();
    let t = risk.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let mut x = vec![linalg::identity(d) * Complex64::new(1.0 / m as f64, 0.0); m];
    x.extend(risk.iter().map(|r| scalar(t - r)));
    x.push(scalar(t));

    let xi0 = 1.0 / (m as f64 + 1.0);
    let mut y = vec![0.0; d * d + m];
    y[..d].fill(-1.0);
    for i in 0..m {
        y[layout.risk_row(i)] = -xi0;
    }
    let mut z: Vec<CMat> = (0..m)
        .map(|j| {
            let mut zj = linalg::identity(d);
            for (i, r) in rho.iter().enumerate() {
                zj += r * Complex64::new(xi0 * cost[j][i], 0.0);
            }
            linalg::hermitian_part(&zj)
        })
        .collect();
    z.extend((0..m).map(|_| scalar(xi0)));
    z.push(scalar(1.0 - m as f64 * xi0));
    Iterate { x, z, y }
}

struct Candidate {
    merit: f64,
    iterate: Option<Iterate>,
    prior: PriorDistribution,
    measurement: Measurement,
    risks: Vec<f64>,
    spread: f64,
    bayes: OptimalityReport,
}

impl Candidate {
    /// The equal-risk spread folded into the Bayes report, so that one
    /// selection rule serves both solvers.
    fn combined(&self) -> OptimalityReport {
        let mut r = self.bayes.clone();
        r.complementarity.push(self.spread);
        r
    }
}

fn evaluate(
    operators: &[CMat],
    prior: PriorDistribution,
    states: &StateVectors,
    cost: &CostMatrix,
    merit: f64,
    iterate: Option<Iterate>,
) -> Result<Candidate> {
    let measurement = Measurement::from_near_complete(operators)?;
    let channel = conditional_error_matrix(&measurement, states)?;
    let risks = conditional_risks(&channel, cost);
    let spread = support_spread(&risks, &prior);
    let problem = DetectionProblem::new(states.clone(), prior.clone(), cost.clone())?;
    let bayes = check_bayes_optimality(&measurement, &problem)?;
    Ok(Candidate {
        merit,
        iterate,
        prior,
        measurement,
        risks,
        spread,
        bayes,
    })
}

/// Newton refinements with the prior free on the support read off the
/// interior iterate: `i` is in the support when its multiplier exceeds its
/// slack. One candidate per plausible active face.
fn refine(
    best: &Candidate,
    states: &StateVectors,
    cost: &CostMatrix,
    shifted: &[Vec<f64>],
    layout: &Layout,
) -> Vec<Candidate> {
    let Layout { m, d } = *layout;
    let Some(it) = best.iterate.as_ref() else {
        return Vec::new();
    };
    let xi: Vec<f64> = (0..m).map(|i| -it.y[layout.risk_row(i)]).collect();
    let support: Vec<usize> = (0..m).filter(|&i| xi[i] > it.x[layout.slack(i)][(0, 0)].re).collect();
    if support.is_empty() {
        return Vec::new();
    }
    let rho = states.densities();
    let model = Model {
        rho: &rho,
        cost: shifted,
        prior: xi,
        free_support: Some(support),
    };
    let y = hermitian_combination(d, &it.y[..d * d]);
    let t = it.x[layout.epigraph()][(0, 0)].re;
    active_faces(&it.x[..m], &it.z[..m])
        .into_iter()
        .filter_map(|face| {
            let refined = polish(&model, face, y.clone(), t)?;
            if refined.prior.iter().any(|&w| w < 0.0) {
                return None;
            }
            let prior = PriorDistribution::normalized(refined.prior).ok()?;
            evaluate(&refined.operators, prior, states, cost, 0.0, None).ok()
        })
        .collect()
}

/// Minimax POVM and least-favorable prior for `states` under `cost`.
///
/// The returned solution is flagged `converged` when both the equal-risk
/// spread over the worst prior's support and the Bayes optimality residual
/// at that prior are within `tol`. The best iterate is returned either way.
pub fn minimax_solve(states: &StateVectors, cost: &CostMatrix, tol: f64) -> Result<MinimaxSolution> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let m = states.count();
    if cost.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} states, {}x{} costs", cost.len(), cost.len())));
    }
    let layout = Layout { m, d: states.dim() };
    let (shifted, _) = shifted_costs(cost);
    let sdp = minimax_sdp(states, &shifted, &layout);
    let mut ipm = Ipm::with_start(&sdp, IPM_TOL, feasible_start(states, &shifted, &layout));

    let mut best: Option<Candidate> = None;
    let mut since_best = 0;
    loop {
        let it = ipm.iterate();
        let raw: Vec<f64> = (0..m).map(|i| (-it.y[layout.risk_row(i)]).max(0.0)).collect();
        let prior = PriorDistribution::normalized(raw).unwrap_or_else(|_| PriorDistribution::uniform(m));
        let c = evaluate(&it.x[..m], prior, states, cost, ipm.diagnostics().merit(), Some(it.clone()))?;
        let incumbent = best.as_ref().map(|b| (b.combined(), b.merit));
        since_best += 1;
        if prefer(&c.combined(), c.merit, incumbent.as_ref().map(|(r, m)| (r, *m)), tol) {
            best = Some(c);
            since_best = 0;
        }
        if ipm.status() != IpmStatus::Running || ipm.iterations() >= DEFAULT_MAX_ITER || since_best > PATIENCE {
            break;
        }
        ipm.step();
    }
    let mut best = best.expect("at least one iterate");
    for refined in refine(&best, states, cost, &shifted, &layout) {
        if refined.combined().residual() < best.combined().residual() {
            best = refined;
        }
    }
    let value = best
        .risks
        .iter()
        .zip(best.prior.weights())
        .map(|(r, w)| r * w)
        .sum::<f64>();
    let bayes_residual = best.bayes.residual();
    Ok(MinimaxSolution {
        full_spread: spread(best.risks.iter().copied()),
        equal_error_spread: best.spread,
        converged: best.spread <= tol && bayes_residual <= tol,
        bayes_residual,
        value,
        conditional_risks: best.risks,
        worst_prior: best.prior,
        measurement: best.measurement,
        iterations: ipm.iterations(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimaxReport {
    pub equal_error_spread: f64,
    pub full_spread: f64,
    pub bayes: OptimalityReport,
    /// `max_ξ Bayes(ξ)` over the prior grid.
    pub grid_maximum: f64,
    pub grid_argmax: Vec<f64>,
    /// `|grid_maximum − value|`.
    pub saddle_gap: f64,
}

impl MinimaxReport {
    pub fn certified(&self, tol: f64, gap_tol: f64) -> bool {
        self.equal_error_spread <= tol && self.bayes.certified(tol) && self.saddle_gap <= gap_tol
    }
}

/// Re-checks a minimax solution: equal risks on the support, Bayes
/// optimality at the worst prior, and the saddle gap against a prior grid
/// of the given resolution.
pub fn check_minimax_optimality(
    sol: &MinimaxSolution,
    states: &StateVectors,
    cost: &CostMatrix,
    grid_resolution: f64,
) -> Result<MinimaxReport> {
    let channel = conditional_error_matrix(&sol.measurement, states)?;
    let risks = conditional_risks(&channel, cost);
    let problem = DetectionProblem::new(states.clone(), sol.worst_prior.clone(), cost.clone())?;
    let bayes = check_bayes_optimality(&sol.measurement, &problem)?;
    let (argmax, grid_maximum) = grid_maximize(states.count(), grid_resolution, |prior| {
        let p = DetectionProblem::new(states.clone(), prior.clone(), cost.clone())
            .expect("dimensions already checked");
        bayes_solve(&p, 1e-9, DEFAULT_MAX_ITER)
            .map(|s| s.bayes_risk)
            .unwrap_or(f64::NAN)
    })?;
    Ok(MinimaxReport {
        equal_error_spread: support_spread(&risks, &sol.worst_prior),
        full_spread: spread(risks.iter().copied()),
        bayes,
        saddle_gap: (grid_maximum - sol.value).abs(),
        grid_maximum,
        grid_argmax: argmax.weights().to_vec(),
    })
}

const COARSE_BUDGET: usize = 2000;
const ZOOM: usize = 4;

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// All lattice points `k/n` of the simplex with `k_1 + … + k_m = n`.
fn full_lattice(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0; m];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
    }
    rec(0, n, &mut current, &mut out);
    out
}

/// Nearest lattice point (largest-remainder rounding).
fn round_to_lattice(x: &[f64], n: usize) -> Vec<usize> {
    let scaled: Vec<f64> = x.iter().map(|v| v * n as f64).collect();
    let mut k: Vec<usize> = scaled.iter().map(|v| v.floor().max(0.0) as usize).collect();
    let mut left = n.saturating_sub(k.iter().sum());
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        k[i] += 1;
        left -= 1;
    }
    k
}

/// Lattice points of spacing `1/n` within `radius` steps of `center`.
fn window(center: &[usize], n: usize, radius: usize) -> Vec<Vec<usize>> {
    let m = center.len();
    let free = m - 1;
    let span = 2 * radius + 1;
    let total = span.pow(free as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut point = vec![0usize; m];
        let mut sum: i64 = 0;
        let mut ok = true;
        for (i, slot) in point.iter_mut().enumerate().take(free) {
            let off = (c % span) as i64 - radius as i64;
            c /= span;
            let v = center[i] as i64 + off;
            if v < 0 {
                ok = false;
                break;
            }
            *slot = v as usize;
            sum += v;
        }
        if !ok || sum > n as i64 {
            continue;
        }
        point[free] = n - sum as usize;
        out.push(point);
    }
    out
}

/// Maximizes `f` over the probability simplex on a lattice of spacing
/// `resolution`, assuming `f` is concave.
///
/// A coarse full lattice locates the maximum; successively finer windows
/// around the incumbent refine it down to the requested spacing. Points are
/// evaluated in parallel; ties resolve to the first point in lattice order.
pub fn grid_maximize<F>(m: usize, resolution: f64, f: F) -> Result<(PriorDistribution, f64)>
where
    F: Fn(&PriorDistribution) -> f64 + Sync,
{
    if m == 0 {
        return Err(Error::EmptyProblem("empty simplex".into()));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Search(format!("grid resolution must be in (0, 1], got {resolution}")));
    }
    let n_final = (1.0 / resolution).round().max(1.0) as usize;
    let mut n = n_final;
    while n > 1 && binomial(n + m - 1, m - 1) > COARSE_BUDGET {
        n = n.div_ceil(ZOOM);
    }

    let evaluate = |points: &[Vec<usize>], n: usize| -> Option<(Vec<f64>, f64)> {
        let values: Vec<f64> = points
            .par_iter()
            .map(|k| {
                let w: Vec<f64> = k.iter().map(|&v| v as f64 / n as f64).collect();
                PriorDistribution::normalized(w).map_or(f64::NAN, |p| f(&p))
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in values.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (points[i].iter().map(|&k| k as f64 / n as f64).collect(), v))
    };

    let Some((mut x, mut value)) = evaluate(&full_lattice(m, n), n) else {
        return Err(Error::Search("objective undefined on the whole grid".into()));
    };
    while n < n_final {
        let next = (n * ZOOM).min(n_final);
        let radius = (2 * next).div_ceil(n);
        let center = round_to_lattice(&x, next);
        if let Some((xn, vn)) = evaluate(&window(&center, next, radius), next) {
            if vn >= value {
                x = xn;
                value = vn;
            }
        }
        n = next;
    }
    Ok((PriorDistribution::normalized(x)?, value))
}
