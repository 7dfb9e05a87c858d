//! Turning a task visit order into a full plan.
//!
//! Every planner produces an order of task-graph nodes; this module
//! stitches the corresponding legs, times the result, scores it, and
//! defines the ranking shared by all planners.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::legs::{LegMatrix, DEFAULT_TURN_WEIGHT_CELLS};
use crate::objectives::{
    check_windows, scalar_objective, simulate_times, FeasibilityReport, Norms, ObjectiveError, ObjectiveVector,
    Trajectory, WaitPolicy, Weights, DEFAULT_TURN_THRESHOLD,
};
use crate::world::Scenario;

/// Knobs shared by all planners that are not specific to one algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Radians; heading changes above this count as turns.
    pub turn_threshold: f64,
    pub wait_policy: WaitPolicy,
    /// Per-turn A* leg cost in cells (multiplied by the map resolution).
    pub turn_weight_cells: f64,
    /// Overrides the scenario-derived normalization when set.
    pub norms: Option<Norms>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            turn_threshold: DEFAULT_TURN_THRESHOLD,
            wait_policy: WaitPolicy::Allow,
            turn_weight_cells: DEFAULT_TURN_WEIGHT_CELLS,
            norms: None,
        }
    }
}

impl EvalSettings {
    pub fn turn_weight(&self, scenario: &Scenario) -> f64 {
        self.turn_weight_cells * scenario.map().resolution()
    }

    pub fn norms_for(&self, scenario: &Scenario) -> Norms {
        self.norms.unwrap_or_else(|| Norms::for_scenario(scenario))
    }
}

/// A scored plan. Every planner returns this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Task ids in visiting order.
    pub visit_order: Vec<u32>,
    /// The same order as task-graph node ids.
    #[serde(skip)]
    pub nodes: Vec<usize>,
    pub trajectory: Trajectory,
    pub objectives: ObjectiveVector,
    #[serde(rename = "F")]
    pub f: f64,
    pub feasibility: FeasibilityReport,
    /// All tasks visited inside their windows.
    pub complete: bool,
}

impl PlanResult {
    pub fn completion(&self) -> f64 {
        self.feasibility.completion_fraction
    }
}

/// Ranking: higher completion first, then lower F.
pub fn rank_cmp(a: &PlanResult, b: &PlanResult) -> Ordering {
    b.completion()
        .total_cmp(&a.completion())
        .then_with(|| a.f.total_cmp(&b.f))
}

/// Strictly better under [`rank_cmp`].
pub fn is_better(a: &PlanResult, b: &PlanResult) -> bool {
    rank_cmp(a, b) == Ordering::Less
}

/// Ant or decoder state while a tour is being extended.
#[derive(Debug, Clone)]
pub struct RouteState {
    pub node: usize,
    /// Seconds; the time the robot leaves `node`.
    pub time: f64,
    pub visited: Vec<bool>,
    pub order: Vec<usize>,
}

impl RouteState {
    pub fn at_start(n_nodes: usize) -> Self {
        let mut visited = vec![false; n_nodes];
        visited[0] = true;
        Self {
            node: 0,
            time: 0.0,
            visited,
            order: Vec::new(),
        }
    }

    /// Arrival time at `node` when driving there next.
    pub fn arrival_at(&self, node: usize, scenario: &Scenario, legs: &LegMatrix) -> f64 {
        self.time + legs.get(self.node, node).length / scenario.speed()
    }

    /// Whether `node` is unvisited and can still be served in its window.
    pub fn admits(&self, node: usize, scenario: &Scenario, legs: &LegMatrix, wait: WaitPolicy) -> bool {
        if self.visited[node] {
            return false;
        }
        let task = &scenario.tasks()[node - 1];
        let arrival = self.arrival_at(node, scenario, legs);
        arrival <= task.window_end && (wait == WaitPolicy::Allow || arrival >= task.window_start)
    }

    pub fn advance(&mut self, node: usize, scenario: &Scenario, legs: &LegMatrix, wait: WaitPolicy) {
        let task = &scenario.tasks()[node - 1];
        let arrival = self.arrival_at(node, scenario, legs);
        self.time = match wait {
            WaitPolicy::Allow => arrival.max(task.window_start),
            WaitPolicy::Forbid => arrival,
        };
        self.node = node;
        self.visited[node] = true;
        self.order.push(node);
    }

    pub fn is_done(&self) -> bool {
        self.visited.iter().all(|&v| v)
    }
}

/// Scores visit orders for one scenario under fixed settings.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    scenario: &'a Scenario,
    legs: &'a LegMatrix,
    weights: Weights,
    norms: Norms,
    settings: EvalSettings,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        scenario: &'a Scenario,
        legs: &'a LegMatrix,
        weights: Weights,
        settings: EvalSettings,
    ) -> Result<Self, ObjectiveError> {
        let norms = settings.norms_for(scenario);
        // Rejects non-positive norms up front.
        scalar_objective(&ObjectiveVector::default(), &weights, &norms)?;
        Ok(Self {
            scenario,
            legs,
            weights,
            norms,
            settings,
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn legs(&self) -> &'a LegMatrix {
        self.legs
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn norms(&self) -> &Norms {
        &self.norms
    }

    pub fn settings(&self) -> &EvalSettings {
        &self.settings
    }

    pub fn wait_policy(&self) -> WaitPolicy {
        self.settings.wait_policy
    }

    /// Task-graph nodes of all tasks, in ascending task id order.
    pub fn task_nodes_by_id(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = (1..self.scenario.n_nodes()).collect();
        nodes.sort_by_key(|&n| self.scenario.tasks()[n - 1].id);
        nodes
    }

    /// Stitched grid points for visiting `nodes` from the start.
    pub fn route_points(&self, nodes: &[usize]) -> Vec<crate::world::Cell> {
        let mut points = vec![self.scenario.start()];
        let mut at = 0;
        for &n in nodes {
            points.extend_from_slice(&self.legs.get(at, n).cells[1..]);
            at = n;
        }
        points
    }

    /// Full plan for a node order (node ids, start excluded).
    pub fn evaluate(&self, nodes: &[usize]) -> PlanResult {
        let scenario = self.scenario;
        let visit_order: Vec<u32> = nodes.iter().map(|&n| scenario.tasks()[n - 1].id).collect();
        let points = self.route_points(nodes);
        let trajectory = simulate_times(&points, &visit_order, scenario, self.settings.wait_policy)
            .expect("stitched legs form a connected route");
        let objectives = ObjectiveVector::of(&trajectory, scenario.map().resolution(), self.settings.turn_threshold);
        let f = scalar_objective(&objectives, &self.weights, &self.norms).expect("norms checked in new");
        let feasibility = check_windows(&trajectory, scenario.tasks());
        let complete = feasibility.met_count() == scenario.tasks().len();
        PlanResult {
            visit_order,
            nodes: nodes.to_vec(),
            trajectory,
            objectives,
            f,
            feasibility,
            complete,
        }
    }

    /// Follows `permutation`, skipping every task that can no longer be
    /// served when its turn comes, and scores the result.
    pub fn decode(&self, permutation: &[usize]) -> PlanResult {
        let mut state = RouteState::at_start(self.scenario.n_nodes());
        for &n in permutation {
            if state.admits(n, self.scenario, self.legs, self.settings.wait_policy) {
                state.advance(n, self.scenario, self.legs, self.settings.wait_policy);
            }
        }
        self.evaluate(&state.order)
    }
}
