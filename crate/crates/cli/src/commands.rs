use crate::config::{parse, AttackConfig, MinimaxConfig, SolveConfig};
use crate::output::{json, File};
use crate::Failure;
use priorcipher::cipher::{run_session, Protocol, SessionConfig, SessionSummary};
use priorcipher::detection::{
    bayes_solve, conditional_error_matrix, minimax_solve, CostMatrix, DetectionProblem, OptimalityReport,
    PriorDistribution,
};
use priorcipher::metrics::{eta_search, key_attack, EtaSearchConfig, SurfacePoint};
use serde::Serialize;
use std::fmt::Write as _;

/// Files to write, and whether the run counts as a success once they are.
pub type Outcome = Result<(Vec<File>, Result<(), Failure>), Failure>;

pub const SOLVE_SCHEMA: &str = "priorcipher.solve/1";
pub const MINIMAX_SCHEMA: &str = "priorcipher.minimax/1";
pub const SIMULATE_SCHEMA: &str = "priorcipher.simulate/1";
pub const ETA_SCHEMA: &str = "priorcipher.eta-sweep/1";
pub const ETA_SURFACE_SCHEMA: &str = "priorcipher.eta-surface/1";
pub const ATTACK_SCHEMA: &str = "priorcipher.attack/1";
pub const KEY_POSTERIOR_SCHEMA: &str = "priorcipher.key-posterior/1";

type Operators = Vec<Vec<Vec<[f64; 2]>>>;

fn status(converged: bool, what: &str) -> Result<(), Failure> {
    if converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!("{what} did not reach the requested tolerance")))
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    schema: &'static str,
    m: usize,
    dim: usize,
    prior: &'a [f64],
    error_probability: f64,
    bayes_risk: f64,
    converged: bool,
    iterations: usize,
    optimality_residual: f64,
    residuals: &'a OptimalityReport,
    conditional_error_matrix: Vec<Vec<f64>>,
    measurement: Operators,
}

pub fn solve(text: &str, _seed: Option<u64>) -> Outcome {
    let cfg: SolveConfig = parse(text)?;
    let states = cfg.states.states(cfg.transmittance)?;
    let m = states.count();
    let prior = match cfg.prior {
        Some(w) => PriorDistribution::new(w)?,
        None => PriorDistribution::uniform(m),
    };
    let cost = cfg.cost.unwrap_or_else(|| CostMatrix::error_probability(m));
    let p = DetectionProblem::new(states, prior, cost)?;
    let sol = bayes_solve(&p, cfg.tol, cfg.max_iter)?;
    let report = SolveReport {
        schema: SOLVE_SCHEMA,
        m,
        dim: p.dim(),
        prior: p.prior.weights(),
        error_probability: sol.error_probability,
        bayes_risk: sol.bayes_risk,
        converged: sol.converged,
        iterations: sol.iterations,
        optimality_residual: sol.optimality_residual,
        residuals: &sol.report,
        conditional_error_matrix: conditional_error_matrix(&sol.measurement, &p.states)?,
        measurement: sol.measurement.to_entry_lists(),
    };
    Ok((vec![json("solve.json", &report)], status(sol.converged, "Bayes solver")))
}

#[derive(Serialize)]
struct MinimaxOut<'a> {
    schema: &'static str,
    m: usize,
    worst_prior: &'a [f64],
    value: f64,
    equal_error_spread: f64,
    full_spread: f64,
    conditional_risks: &'a [f64],
    bayes_residual: f64,
    converged: bool,
    iterations: usize,
    measurement: Operators,
}

pub fn minimax(text: &str, _seed: Option<u64>) -> Outcome {
    let cfg: MinimaxConfig = parse(text)?;
    let states = cfg.states.states(cfg.transmittance)?;
    let m = states.count();
    let cost = cfg.cost.unwrap_or_else(|| CostMatrix::error_probability(m));
    let sol = minimax_solve(&states, &cost, cfg.tol)?;
    let report = MinimaxOut {
        schema: MINIMAX_SCHEMA,
        m,
        worst_prior: sol.worst_prior.weights(),
        value: sol.value,
        equal_error_spread: sol.equal_error_spread,
        full_spread: sol.full_spread,
        conditional_risks: &sol.conditional_risks,
        bayes_residual: sol.bayes_residual,
        converged: sol.converged,
        iterations: sol.iterations,
        measurement: sol.measurement.to_entry_lists(),
    };
    Ok((vec![json("minimax.json", &report)], status(sol.converged, "minimax solver")))
}

#[derive(Serialize)]
struct SimulateOut<'a> {
    schema: &'static str,
    seed: u64,
    #[serde(flatten)]
    summary: &'a SessionSummary,
}

pub fn simulate(text: &str, seed: Option<u64>) -> Outcome {
    let mut cfg: SessionConfig = parse(text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let session = run_session(&cfg)?;
    let report = SimulateOut {
        schema: SIMULATE_SCHEMA,
        seed: cfg.seed,
        summary: &session.summary,
    };
    let files = vec![
        json("simulate.json", &report),
        File {
            name: "transcript.tsv",
            contents: session.transcript.to_tsv(),
        },
    ];
    Ok((files, Ok(())))
}

#[derive(Serialize)]
struct EtaOut<'a> {
    schema: &'static str,
    kind: &'a str,
    m: usize,
    budget: usize,
    min_weight: f64,
    seed: u64,
    evaluations: usize,
    best: &'a SurfacePoint,
}

fn surface_tsv(m: usize, surface: &[SurfacePoint]) -> String {
    let mut out = String::new();
    writeln!(out, "# schema: {ETA_SURFACE_SCHEMA}").unwrap();
    let mut header = String::from("mean_photon\ttheta\tphase\tpe_bayes\tpe_minimax\tratio");
    for i in 0..m {
        write!(header, "\txi_{i}").unwrap();
    }
    writeln!(out, "{header}").unwrap();
    for p in surface {
        let phase = serde_json::to_value(p.phase).unwrap();
        let r = &p.report;
        write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.mean_photon,
            p.theta,
            phase.as_str().unwrap(),
            r.pe_bayes,
            r.pe_minimax,
            r.ratio
        )
        .unwrap();
        for w in &r.prior {
            write!(out, "\t{w}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn eta_sweep(text: &str, seed: Option<u64>) -> Outcome {
    let mut cfg: EtaSearchConfig = parse(text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = eta_search(&cfg)?;
    let report = EtaOut {
        schema: ETA_SCHEMA,
        kind: &cfg.kind,
        m: cfg.m,
        budget: cfg.budget,
        min_weight: cfg.min_weight,
        seed: cfg.seed,
        evaluations: result.surface.len(),
        best: &result.best,
    };
    let files = vec![
        json("eta_sweep.json", &report),
        File {
            name: "eta_surface.tsv",
            contents: surface_tsv(cfg.m, &result.surface),
        },
    ];
    Ok((files, Ok(())))
}

#[derive(Serialize)]
struct AttackOut {
    schema: &'static str,
    seed: u64,
    key_bits: usize,
    slots: usize,
    true_key: u64,
    map_key: u64,
    guessing_probability: f64,
    true_key_posterior: f64,
    entropy_bits: f64,
    eve_error_rate: f64,
}

pub fn attack(text: &str, seed: Option<u64>) -> Outcome {
    let mut cfg: AttackConfig = parse(text)?;
    if let Some(s) = seed {
        cfg.session.seed = s;
    }
    let secret = cfg.session.secret()?;
    if secret.0.bit_len() != cfg.key_bits {
        return Err(Failure::Config(format!(
            "secret key has {} bits but key_bits is {}",
            secret.0.bit_len(),
            cfg.key_bits
        )));
    }
    let true_key = u64::from_str_radix(&secret.0.to_hex(), 16).map_err(|e| Failure::Config(format!("secret key: {e}")))?;
    let mut protocol = Protocol::new(&cfg.session)?;
    let session = protocol.run(cfg.session.slots, cfg.session.seed)?;
    let posterior = key_attack(&session.transcript.eve_outcomes(), cfg.key_bits, &protocol)?;
    let report = AttackOut {
        schema: ATTACK_SCHEMA,
        seed: cfg.session.seed,
        key_bits: cfg.key_bits,
        slots: posterior.slots,
        true_key,
        map_key: posterior.map_key,
        guessing_probability: posterior.guessing_probability,
        true_key_posterior: posterior.posterior[true_key as usize],
        entropy_bits: posterior.entropy_bits,
        eve_error_rate: session.summary.eve.empirical,
    };
    let mut table = String::new();
    writeln!(table, "# schema: {KEY_POSTERIOR_SCHEMA}").unwrap();
    writeln!(table, "key\tlog_likelihood\tposterior").unwrap();
    for (k, (ll, p)) in posterior.log_likelihood.iter().zip(&posterior.posterior).enumerate() {
        writeln!(table, "{k}\t{ll}\t{p}").unwrap();
    }
    let files = vec![
        json("attack.json", &report),
        File {
            name: "key_posterior.tsv",
            contents: table,
        },
    ];
    Ok((files, Ok(())))
}
