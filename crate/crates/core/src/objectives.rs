//! Trajectory timing, the four planning objectives (length, makespan,
//! turns, smoothness), curvature spread, time-window checks and the
//! weighted scalarization that ranks plans.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Cell, Scenario, Task};

/// Default turn threshold: 15 degrees.
pub const DEFAULT_TURN_THRESHOLD: f64 = PI / 12.0;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("points {index} and {} are not grid-adjacent", index + 1)]
    Disconnected { index: usize },
    #[error("trajectory must start at the scenario start cell")]
    NotAtStart,
    #[error("route references unknown task {0}")]
    UnknownTask(u32),
    #[error("route task {0} is never reached by the points")]
    RouteTaskNotReached(u32),
    #[error("curvature needs at least 3 distinct points")]
    DegeneratePath,
    #[error("normalization constant for {0} must be positive")]
    NonPositiveNorm(&'static str),
    #[error("weights must lie in [0, 1] and sum to 1, got {0:?}")]
    InvalidWeights([f64; 4]),
}

/// Whether the robot may wait at a task cell that it reaches before the
/// window opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaitPolicy {
    #[default]
    Allow,
    Forbid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskVisit {
    pub task_id: u32,
    /// Index into `Trajectory::points` at which the task counts as visited.
    pub index: usize,
}

/// Timestamped grid path. Consecutive identical points are waiting steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Cell>,
    pub arrival_times: Vec<f64>,
    pub task_visits: Vec<TaskVisit>,
}

impl Trajectory {
    /// Robot parked at `start`.
    pub fn at(start: Cell) -> Self {
        Self {
            points: vec![start],
            arrival_times: vec![0.0],
            task_visits: Vec::new(),
        }
    }
}

/// Accumulates step lengths as counts of unit and diagonal grid hops so
/// that the total does not depend on summation order.
#[derive(Debug, Default, Clone, Copy)]
struct StepTally {
    orthogonal: u64,
    diagonal: u64,
    other: f64,
}

impl StepTally {
    fn add(&mut self, a: Cell, b: Cell) {
        let dc = a.col.abs_diff(b.col);
        let dr = a.row.abs_diff(b.row);
        match (dc, dr) {
            (0, 0) => {}
            (1, 0) | (0, 1) => self.orthogonal += 1,
            (1, 1) => self.diagonal += 1,
            _ => self.other += ((dc * dc + dr * dr) as f64).sqrt(),
        }
    }

    fn meters(&self, resolution: f64) -> f64 {
        (self.orthogonal as f64 + self.diagonal as f64 * SQRT_2 + self.other) * resolution
    }
}

/// Sum of Euclidean distances between consecutive points, in meters.
/// Waiting steps contribute nothing.
pub fn path_length(points: &[Cell], resolution: f64) -> f64 {
    let mut tally = StepTally::default();
    for w in points.windows(2) {
        tally.add(w[0], w[1]);
    }
    tally.meters(resolution)
}

/// Points with consecutive duplicates (waiting steps) removed.
fn distinct_positions(points: &[Cell]) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

fn delta(a: Cell, b: Cell) -> (i64, i64) {
    (b.col as i64 - a.col as i64, b.row as i64 - a.row as i64)
}

/// Unsigned angle between `u` and `v`, in [0, pi].
fn angle_between(u: (i64, i64), v: (i64, i64)) -> f64 {
    let cross = u.0 * v.1 - u.1 * v.0;
    let dot = u.0 * v.0 + u.1 * v.1;
    (cross.abs() as f64).atan2(dot as f64)
}

/// Heading change at every interior distinct point, in radians.
pub fn heading_changes(points: &[Cell]) -> Vec<f64> {
    let p = distinct_positions(points);
    p.windows(3)
        .map(|w| angle_between(delta(w[0], w[1]), delta(w[1], w[2])))
        .collect()
}

/// Number of heading changes strictly above `threshold`.
pub fn turning_count(points: &[Cell], threshold: f64) -> usize {
    heading_changes(points)
        .into_iter()
        .filter(|&theta| theta > threshold)
        .count()
}

/// Sum of absolute differences between consecutive heading changes.
pub fn smoothness(points: &[Cell]) -> f64 {
    heading_changes(points).windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Population standard deviation of discrete curvature (1/m), where the
/// curvature at an interior point is its heading change divided by the
/// mean length of the two adjacent segments.
pub fn curvature_std(points: &[Cell], resolution: f64) -> Result<f64, ObjectiveError> {
    let p = distinct_positions(points);
    if p.len() < 3 {
        return Err(ObjectiveError::DegeneratePath);
    }
    let seg = |a: Cell, b: Cell| {
        let (dc, dr) = delta(a, b);
        ((dc * dc + dr * dr) as f64).sqrt() * resolution
    };
    let curvatures: Vec<f64> = p
        .windows(3)
        .map(|w| {
            let theta = angle_between(delta(w[0], w[1]), delta(w[1], w[2]));
            theta / (0.5 * (seg(w[0], w[1]) + seg(w[1], w[2])))
        })
        .collect();
    // Shifted by the first value; exact zero for constant input.
    let shift = curvatures[0];
    let n = curvatures.len() as f64;
    let (s, ss) = curvatures.iter().fold((0.0, 0.0), |(s, ss), &k| {
        let d = k - shift;
        (s + d, ss + d * d)
    });
    let var = (ss / n - (s / n) * (s / n)).max(0.0);
    Ok(var.sqrt())
}

/// Times a grid path for `scenario` and records the visits of `route`.
///
/// Route tasks are matched in order: each is visited at the first arrival
/// at its cell after the previous route task. Passing over the cell of a
/// task that is not next in the route does not count. Within a stretch of
/// movement the clock reads `t_last_stop + distance_since_stop / speed`,
/// so a stretch between two stops takes exactly `path_length / speed`.
/// With [`WaitPolicy::Allow`] an early arrival inserts a waiting point
/// stamped with the window start.
pub fn simulate_times(
    points: &[Cell],
    route: &[u32],
    scenario: &Scenario,
    wait: WaitPolicy,
) -> Result<Trajectory, ObjectiveError> {
    if points.first() != Some(&scenario.start()) {
        return Err(ObjectiveError::NotAtStart);
    }
    let route_tasks: Vec<&Task> = route
        .iter()
        .map(|&id| scenario.task_by_id(id).ok_or(ObjectiveError::UnknownTask(id)))
        .collect::<Result<_, _>>()?;
    let map = scenario.map();
    let speed = scenario.speed();

    let mut traj = Trajectory::at(points[0]);
    traj.points.reserve(points.len());
    let mut anchor = 0.0;
    let mut tally = StepTally::default();
    let mut next = 0;

    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if a != b && !map.step_allowed(a, b) {
            return Err(ObjectiveError::Disconnected { index: i });
        }
        tally.add(a, b);
        let t = anchor + tally.meters(map.resolution()) / speed;
        traj.points.push(b);
        traj.arrival_times.push(t);

        if a != b {
            if let Some(task) = route_tasks.get(next).filter(|task| task.cell == b) {
                let mut visit_time = t;
                if wait == WaitPolicy::Allow && t < task.window_start {
                    visit_time = task.window_start;
                    traj.points.push(b);
                    traj.arrival_times.push(visit_time);
                }
                traj.task_visits.push(TaskVisit {
                    task_id: task.id,
                    index: traj.points.len() - 1,
                });
                anchor = visit_time;
                tally = StepTally::default();
                next += 1;
            }
        }
    }
    if let Some(task) = route_tasks.get(next) {
        return Err(ObjectiveError::RouteTaskNotReached(task.id));
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitStatus {
    Met,
    MissedEarly,
    MissedLate,
    Unvisited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub task_id: u32,
    pub arrival_s: Option<f64>,
    pub status: VisitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// One entry per scenario task, in scenario order.
    pub tasks: Vec<TaskStatus>,
    pub completion_fraction: f64,
}

impl FeasibilityReport {
    pub fn met_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.status == VisitStatus::Met).count()
    }
}

/// A task is met when its recorded visit time lies inside its window.
pub fn check_windows(traj: &Trajectory, tasks: &[Task]) -> FeasibilityReport {
    let statuses: Vec<TaskStatus> = tasks
        .iter()
        .map(|task| {
            let visit = traj.task_visits.iter().find(|v| v.task_id == task.id);
            match visit {
                None => TaskStatus {
                    task_id: task.id,
                    arrival_s: None,
                    status: VisitStatus::Unvisited,
                },
                Some(v) => {
                    let t = traj.arrival_times[v.index];
                    let status = if t < task.window_start {
                        VisitStatus::MissedEarly
                    } else if t > task.window_end {
                        VisitStatus::MissedLate
                    } else {
                        VisitStatus::Met
                    };
                    TaskStatus {
                        task_id: task.id,
                        arrival_s: Some(t),
                        status,
                    }
                }
            }
        })
        .collect();
    let met = statuses.iter().filter(|s| s.status == VisitStatus::Met).count();
    let completion_fraction = if tasks.is_empty() {
        0.0
    } else {
        met as f64 / tasks.len() as f64
    };
    FeasibilityReport {
        tasks: statuses,
        completion_fraction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f1_length: f64,
    pub f2_makespan: f64,
    pub f3_turns: usize,
    pub f4_smoothness: f64,
    /// 0 when the path has fewer than three distinct points.
    pub curvature_std: f64,
}

impl ObjectiveVector {
    pub fn of(traj: &Trajectory, resolution: f64, turn_threshold: f64) -> Self {
        let points = &traj.points;
        let f2_makespan = traj
            .task_visits
            .iter()
            .map(|v| traj.arrival_times[v.index])
            .fold(0.0, f64::max);
        Self {
            f1_length: path_length(points, resolution),
            f2_makespan,
            f3_turns: turning_count(points, turn_threshold),
            f4_smoothness: smoothness(points),
            curvature_std: curvature_std(points, resolution).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Weights {
    w: [f64; 4],
}

impl Weights {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Result<Self, ObjectiveError> {
        let w = [w1, w2, w3, w4];
        let in_range = w.iter().all(|x| (0.0..=1.0).contains(x));
        if !in_range || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ObjectiveError::InvalidWeights(w));
        }
        Ok(Self { w })
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.w
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            w: [0.4, 0.3, 0.2, 0.1],
        }
    }
}

impl TryFrom<[f64; 4]> for Weights {
    type Error = ObjectiveError;

    fn try_from(w: [f64; 4]) -> Result<Self, Self::Error> {
        Weights::new(w[0], w[1], w[2], w[3])
    }
}

impl From<Weights> for [f64; 4] {
    fn from(w: Weights) -> Self {
        w.w
    }
}

/// Per-objective divisors that bring the four objectives to a common
/// scale before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub length_m: f64,
    pub makespan_s: f64,
    pub turns: f64,
    pub smoothness_rad: f64,
}

impl Norms {
    pub const TURN_BASELINE: f64 = 20.0;

    /// Map diagonal, diagonal traversal time, 20 turns, and pi.
    pub fn for_scenario(s: &Scenario) -> Self {
        let diag = s.map().diagonal_m();
        Self {
            length_m: diag,
            makespan_s: diag / s.speed(),
            turns: Self::TURN_BASELINE,
            smoothness_rad: PI,
        }
    }

    fn check(&self) -> Result<(), ObjectiveError> {
        for (v, name) in [
            (self.length_m, "length"),
            (self.makespan_s, "makespan"),
            (self.turns, "turns"),
            (self.smoothness_rad, "smoothness"),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(ObjectiveError::NonPositiveNorm(name));
            }
        }
        Ok(())
    }
}

/// Weighted sum of normalized objectives.
pub fn scalar_objective(v: &ObjectiveVector, w: &Weights, norms: &Norms) -> Result<f64, ObjectiveError> {
    norms.check()?;
    let [w1, w2, w3, w4] = w.w;
    Ok(w1 * (v.f1_length / norms.length_m)
        + w2 * (v.f2_makespan / norms.makespan_s)
        + w3 * (v.f3_turns as f64 / norms.turns)
        + w4 * (v.f4_smoothness / norms.smoothness_rad))
}
