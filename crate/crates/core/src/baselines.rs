//! Comparison planners over the same leg library and scoring pipeline as
//! the colony: nearest-feasible greedy stitching of A* legs, a permutation
//! genetic algorithm, and an exhaustive oracle for small instances.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aco::ConvergenceTrace;
use crate::objectives::Weights;
use crate::route::{is_better, Evaluator, PlanResult, RouteState};

/// Largest instance the exhaustive oracle accepts.
pub const EXHAUSTIVE_MAX_TASKS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("exhaustive search supports at most {EXHAUSTIVE_MAX_TASKS} tasks, got {0}")]
    TooManyTasks(usize),
    #[error("invalid GA parameters: {0}")]
    InvalidParams(String),
}

/// Repeatedly drives to the nearest unvisited task (by leg length) that
/// can still be served in its window. Ties go to the earlier window end,
/// then the smaller task id.
pub fn astar_greedy_plan(eval: &Evaluator<'_>) -> PlanResult {
    let scenario = eval.scenario();
    let legs = eval.legs();
    let wait = eval.wait_policy();
    let mut state = RouteState::at_start(scenario.n_nodes());
    loop {
        let next = (1..scenario.n_nodes())
            .filter(|&j| state.admits(j, scenario, legs, wait))
            .min_by(|&a, &b| {
                let (ta, tb) = (&scenario.tasks()[a - 1], &scenario.tasks()[b - 1]);
                legs.get(state.node, a)
                    .length
                    .total_cmp(&legs.get(state.node, b).length)
                    .then(ta.window_end.total_cmp(&tb.window_end))
                    .then(ta.id.cmp(&tb.id))
            });
        match next {
            Some(j) => state.advance(j, scenario, legs, wait),
            None => break,
        }
    }
    eval.evaluate(&state.order)
}

/// Best plan over every visiting order of the tasks. Permutations are
/// enumerated in ascending task-id order and only a strictly better plan
/// replaces the incumbent, so ties resolve to the lexicographically
/// smallest order.
pub fn exhaustive_plan(eval: &Evaluator<'_>) -> Result<PlanResult, BaselineError> {
    let n_tasks = eval.scenario().tasks().len();
    if n_tasks > EXHAUSTIVE_MAX_TASKS {
        return Err(BaselineError::TooManyTasks(n_tasks));
    }
    let nodes = eval.task_nodes_by_id();
    let mut best: Option<PlanResult> = None;
    for perm in nodes.iter().copied().permutations(n_tasks) {
        let candidate = eval.decode(&perm);
        if best.as_ref().is_none_or(|b| is_better(&candidate, b)) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one permutation"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub seed: u64,
    pub weights: Weights,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 300,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament_size: 3,
            seed: 0,
            weights: Weights::default(),
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |msg: &str| Err(BaselineError::InvalidParams(msg.to_string()));
        if self.population == 0 || self.generations == 0 {
            return bad("population and generations must be positive");
        }
        if self.tournament_size < 2 || self.population < self.tournament_size {
            return bad("need 2 <= tournament_size <= population");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("crossover and mutation rates must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<usize>,
    plan: PlanResult,
}

/// Order crossover (OX1): keeps `a[lo..=hi]` in place and fills the other
/// positions with the remaining genes in the order they appear in `b`,
/// starting after `hi` and wrapping around.
pub fn order_crossover(a: &[usize], b: &[usize], lo: usize, hi: usize) -> Vec<usize> {
    let n = a.len();
    let mut child = vec![usize::MAX; n];
    child[lo..=hi].copy_from_slice(&a[lo..=hi]);
    let kept = &a[lo..=hi];
    let mut fill = (1..=n).map(|k| b[(hi + k) % n]).filter(|g| !kept.contains(g));
    for k in 1..=n {
        let pos = (hi + k) % n;
        if child[pos] == usize::MAX {
            child[pos] = fill.next().expect("gene counts match");
        }
    }
    child
}

fn tournament<'p>(pop: &'p [Individual], size: usize, rng: &mut impl Rng) -> &'p Individual {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.gen_range(0..pop.len())];
        if is_better(&c.plan, &best.plan) {
            best = c;
        }
    }
    best
}

fn best_of(pop: &[Individual]) -> &Individual {
    let mut best = &pop[0];
    for ind in &pop[1..] {
        if is_better(&ind.plan, &best.plan) {
            best = ind;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: PlanResult,
    /// Best-so-far after every generation.
    pub trace: ConvergenceTrace,
}

/// Permutation GA with tournament selection, order crossover, swap
/// mutation and one elite. Chromosomes are decoded by skipping tasks that
/// can no longer be served.
pub fn ga_plan(eval: &Evaluator<'_>, ga: &GaParams) -> Result<GaOutcome, BaselineError> {
    ga.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ga.seed);
    let base = eval.task_nodes_by_id();
    let initial: Vec<Vec<usize>> = (0..ga.population)
        .map(|_| {
            let mut g = base.clone();
            g.shuffle(&mut rng);
            g
        })
        .collect();
    evolve(eval, ga, initial, rng)
}

/// [`ga_plan`] from a caller-supplied initial population of node
/// permutations.
pub fn ga_plan_from(eval: &Evaluator<'_>, ga: &GaParams, initial: Vec<Vec<usize>>) -> Result<GaOutcome, BaselineError> {
    ga.validate()?;
    if initial.len() != ga.population {
        return Err(BaselineError::InvalidParams(format!(
            "initial population has {} members, expected {}",
            initial.len(),
            ga.population
        )));
    }
    let rng = ChaCha8Rng::seed_from_u64(ga.seed);
    evolve(eval, ga, initial, rng)
}

fn evolve(
    eval: &Evaluator<'_>,
    ga: &GaParams,
    initial: Vec<Vec<usize>>,
    mut rng: ChaCha8Rng,
) -> Result<GaOutcome, BaselineError> {
    let decode = |genes: Vec<usize>| Individual {
        plan: eval.decode(&genes),
        genes,
    };
    let mut pop: Vec<Individual> = initial.into_iter().map(decode).collect();
    let mut best = best_of(&pop).plan.clone();
    let mut trace = ConvergenceTrace::default();
    let n = pop[0].genes.len();

    for generation in 1..=ga.generations {
        let mut next = vec![best_of(&pop).clone()];
        while next.len() < ga.population {
            let p1 = tournament(&pop, ga.tournament_size, &mut rng);
            let p2 = tournament(&pop, ga.tournament_size, &mut rng);
            let mut genes = if rng.gen::<f64>() < ga.crossover_rate && n > 1 {
                let mut cut = [rng.gen_range(0..n), rng.gen_range(0..n)];
                cut.sort_unstable();
                order_crossover(&p1.genes, &p2.genes, cut[0], cut[1])
            } else {
                p1.genes.clone()
            };
            if rng.gen::<f64>() < ga.mutation_rate && n > 1 {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                genes.swap(i, j);
            }
            next.push(decode(genes));
        }
        pop = next;
        let gen_best = best_of(&pop);
        if is_better(&gen_best.plan, &best) {
            best = gen_best.plan.clone();
        }
        trace.push(generation, &best);
    }
    Ok(GaOutcome { best, trace })
}
