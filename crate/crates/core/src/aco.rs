//! Ant colony optimization over the task graph.
//!
//! Ants start at the depot node and repeatedly pick the next task among
//! those still servable inside their time window, with probability
//! proportional to `tau^beta * eta^gamma`. The heuristic
//! `eta = (1 / d) * 1 / (1 + alpha * turns)` favors short legs with few
//! turns. After each generation the pheromone evaporates by `rho`, every
//! ant deposits `q * completion / F` on its edges, the generation best
//! deposits once more, and the matrix is clamped to `[tau_min, tau_max]`.
//!
//! Note the exponent naming: `beta` weights the pheromone and `gamma` the
//! heuristic (classic ant system calls these alpha and beta), while
//! `alpha` is the turn penalty inside the heuristic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::legs::LegMatrix;
use crate::objectives::{WaitPolicy, Weights};
use crate::route::{is_better, Evaluator, PlanResult, RouteState};
use crate::world::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum AcoError {
    #[error("no candidate node to choose from")]
    EmptyAllowedSet,
    #[error("invalid ACO parameters: {0}")]
    InvalidParams(String),
}

/// Floor on the completion factor of a deposit, so that tours which serve
/// nothing in time still reinforce their edges a little.
pub const COMPLETION_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcoParams {
    pub n_ants: usize,
    pub n_iterations: usize,
    /// Initial pheromone on every edge.
    pub tau0: f64,
    /// Evaporation rate in (0, 1).
    pub rho: f64,
    /// Turn-penalty weight inside the heuristic.
    pub alpha: f64,
    /// Pheromone exponent.
    pub beta: f64,
    /// Heuristic exponent.
    pub gamma: f64,
    pub q_deposit: f64,
    pub weights: Weights,
    pub seed: u64,
    /// Defaults to `0.01 * tau0`.
    pub tau_min: Option<f64>,
    /// Defaults to `100 * tau0`.
    pub tau_max: Option<f64>,
    /// Extra deposit by the best ant of each generation.
    pub elitist: bool,
}

impl Default for AcoParams {
    fn default() -> Self {
        Self {
            n_ants: 30,
            n_iterations: 1000,
            tau0: 1.0,
            rho: 0.1,
            alpha: 0.5,
            beta: 1.0,
            gamma: 2.0,
            q_deposit: 1.0,
            weights: Weights::default(),
            seed: 0,
            tau_min: None,
            tau_max: None,
            elitist: true,
        }
    }
}

impl AcoParams {
    pub fn tau_bounds(&self) -> (f64, f64) {
        (
            self.tau_min.unwrap_or(0.01 * self.tau0),
            self.tau_max.unwrap_or(100.0 * self.tau0),
        )
    }

    pub fn validate(&self) -> Result<(), AcoError> {
        let bad = |msg: &str| Err(AcoError::InvalidParams(msg.to_string()));
        if self.n_ants == 0 || self.n_iterations == 0 {
            return bad("n_ants and n_iterations must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.gamma >= 0.0) {
            return bad("alpha, beta and gamma must be non-negative");
        }
        if self.q_deposit.is_nan() || self.q_deposit <= 0.0 {
            return bad("q_deposit must be positive");
        }
        let (lo, hi) = self.tau_bounds();
        if !(lo > 0.0 && lo <= self.tau0 && self.tau0 <= hi && hi.is_finite()) {
            return bad("need 0 < tau_min <= tau0 <= tau_max");
        }
        Ok(())
    }
}

/// Turn-penalized edge desirability.
pub fn heuristic(legs: &LegMatrix, i: usize, j: usize, alpha: f64) -> f64 {
    let leg = legs.get(i, j);
    (1.0 / leg.length) * (1.0 / (1.0 + alpha * leg.turns as f64))
}

/// Dense `n x n` pheromone table.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneMatrix {
    n: usize,
    tau: Vec<f64>,
}

impl PheromoneMatrix {
    pub fn new(n: usize, tau0: f64) -> Self {
        Self {
            n,
            tau: vec![tau0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.tau[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.tau[i * self.n + j] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.tau
    }
}

/// Selection probabilities proportional to `tau^beta * eta^gamma`.
///
/// Weights are formed in log space and shifted by their maximum before
/// exponentiation, so uniformly scaling `tau` leaves the result unchanged
/// and extreme magnitudes neither overflow nor vanish.
pub fn transition_probabilities(tau: &[f64], eta: &[f64], beta: f64, gamma: f64) -> Result<Vec<f64>, AcoError> {
    debug_assert_eq!(tau.len(), eta.len());
    if tau.is_empty() {
        return Err(AcoError::EmptyAllowedSet);
    }
    let log_w: Vec<f64> = tau
        .iter()
        .zip(eta)
        .map(|(&t, &e)| {
            // x^0 is 1 even for x = 0 or inf; skip the log in that case.
            let a = if beta == 0.0 { 0.0 } else { beta * t.ln() };
            let b = if gamma == 0.0 { 0.0 } else { gamma * e.ln() };
            a + b
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp().max(f64::MIN_POSITIVE)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Unvisited tasks the robot can still reach by their window end from
/// `state`; under [`WaitPolicy::Forbid`] early arrivals are excluded too.
pub fn allowed_set(state: &RouteState, scenario: &Scenario, legs: &LegMatrix, wait: WaitPolicy) -> Vec<usize> {
    (1..scenario.n_nodes())
        .filter(|&j| state.admits(j, scenario, legs, wait))
        .collect()
}

/// Index drawn from `probs` with one uniform variate.
fn sample(probs: &[f64], rng: &mut impl Rng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Precomputed heuristic values for all node pairs.
#[derive(Debug, Clone)]
pub struct HeuristicTable {
    n: usize,
    eta: Vec<f64>,
}

impl HeuristicTable {
    pub fn new(legs: &LegMatrix, alpha: f64) -> Self {
        let n = legs.n_nodes();
        let eta = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    0.0
                } else {
                    heuristic(legs, i, j, alpha)
                }
            })
            .collect();
        Self { n, eta }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.eta[i * self.n + j]
    }
}

/// One ant's tour: sample from the allowed set until it is empty.
pub fn construct_solution(
    eval: &Evaluator<'_>,
    tau: &PheromoneMatrix,
    eta: &HeuristicTable,
    params: &AcoParams,
    rng: &mut impl Rng,
) -> PlanResult {
    let scenario = eval.scenario();
    let legs = eval.legs();
    let wait = eval.wait_policy();
    let mut state = RouteState::at_start(scenario.n_nodes());
    loop {
        let allowed = allowed_set(&state, scenario, legs, wait);
        if allowed.is_empty() {
            break;
        }
        let taus: Vec<f64> = allowed.iter().map(|&j| tau.get(state.node, j)).collect();
        let etas: Vec<f64> = allowed.iter().map(|&j| eta.get(state.node, j)).collect();
        let probs =
            transition_probabilities(&taus, &etas, params.beta, params.gamma).expect("allowed set is non-empty");
        let next = allowed[sample(&probs, rng)];
        state.advance(next, scenario, legs, wait);
    }
    eval.evaluate(&state.order)
}

/// Pheromone an ant lays on each edge of its tour.
pub fn deposit_amount(sol: &PlanResult, params: &AcoParams) -> f64 {
    params.q_deposit * sol.completion().max(COMPLETION_FLOOR) / sol.f.max(1e-12)
}

/// Directed edges of a tour, starting from the depot.
fn tour_edges(nodes: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    std::iter::once(0)
        .chain(nodes.iter().copied())
        .zip(nodes.iter().copied())
}

/// Evaporation, deposits by every solution, an optional elitist deposit by
/// the best of `solutions`, then clamping.
pub fn update_pheromone(tau: &mut PheromoneMatrix, solutions: &[PlanResult], params: &AcoParams) {
    let n = tau.n;
    let mut delta = vec![0.0; n * n];
    for sol in solutions {
        let d = deposit_amount(sol, params);
        for (i, j) in tour_edges(&sol.nodes) {
            delta[i * n + j] += d;
        }
    }
    if params.elitist {
        if let Some(best) = iteration_best(solutions) {
            let d = deposit_amount(best, params);
            for (i, j) in tour_edges(&best.nodes) {
                delta[i * n + j] += d;
            }
        }
    }
    let (lo, hi) = params.tau_bounds();
    for (t, d) in tau.tau.iter_mut().zip(delta) {
        *t = ((1.0 - params.rho) * *t + d).clamp(lo, hi);
    }
}

/// First solution that no later one beats.
fn iteration_best(solutions: &[PlanResult]) -> Option<&PlanResult> {
    let mut best = solutions.first()?;
    for s in &solutions[1..] {
        if is_better(s, best) {
            best = s;
        }
    }
    Some(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based.
    pub iteration: usize,
    #[serde(rename = "best_F")]
    pub best_f: f64,
    pub best_length_m: f64,
    pub best_completion: f64,
}

/// Best-so-far plan statistics after every generation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, iteration: usize, best: &PlanResult) {
        self.rows.push(TraceRow {
            iteration,
            best_f: best.f,
            best_length_m: best.objectives.f1_length,
            best_completion: best.completion(),
        });
    }

    /// `iteration,best_F,best_length_m,best_completion` with one row per
    /// generation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("trace row serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub best: PlanResult,
    pub trace: ConvergenceTrace,
}

/// Random stream of ant `ant` in generation `iteration`: the ChaCha8
/// generator seeded with `seed`, on stream `(iteration << 32) | ant`.
pub fn ant_rng(seed: u64, iteration: usize, ant: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | ant as u64);
    rng
}

/// Runs the colony for `params.n_iterations` generations and returns the
/// best plan found with its convergence trace.
///
/// Ants of one generation are built in parallel; each draws from its own
/// stream, so the outcome does not depend on the thread count.
pub fn plan(eval: &Evaluator<'_>, params: &AcoParams) -> Result<PlanOutcome, AcoError> {
    params.validate()?;
    let n = eval.scenario().n_nodes();
    let eta = HeuristicTable::new(eval.legs(), params.alpha);
    let mut tau = PheromoneMatrix::new(n, params.tau0);
    let mut best: Option<PlanResult> = None;
    let mut trace = ConvergenceTrace::default();

    for iteration in 0..params.n_iterations {
        let ants: Vec<PlanResult> = (0..params.n_ants)
            .into_par_iter()
            .map(|ant| {
                let mut rng = ant_rng(params.seed, iteration, ant);
                construct_solution(eval, &tau, &eta, params, &mut rng)
            })
            .collect();
        if let Some(it_best) = iteration_best(&ants) {
            if best.as_ref().is_none_or(|b| is_better(it_best, b)) {
                best = Some(it_best.clone());
            }
        }
        update_pheromone(&mut tau, &ants, params);
        trace.push(iteration + 1, best.as_ref().expect("n_ants > 0"));
    }
    Ok(PlanOutcome {
        best: best.expect("n_iterations > 0"),
        trace,
    })
}
