//! Multi-constraint ant colony path planning for logistics robots on
//! occupancy grids.
//!
//! The colony sequences task waypoints under time windows; grid geometry
//! comes from precomputed A* legs between every pair of waypoints. Plans
//! are scored on path length, makespan, turn count and smoothness, blended
//! by a normalized weighted sum.

pub mod aco;
pub mod baselines;
pub mod bench;
pub mod legs;
pub mod objectives;
pub mod route;
pub mod world;

pub use aco::{AcoParams, ConvergenceTrace, PheromoneMatrix};
pub use baselines::GaParams;
pub use legs::{Leg, LegMatrix};
pub use objectives::{FeasibilityReport, Norms, ObjectiveVector, Trajectory, WaitPolicy, Weights};
pub use route::{EvalSettings, Evaluator, PlanResult};
pub use world::{Cell, GridMap, Scenario, Task};
