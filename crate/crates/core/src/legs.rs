//! Point-to-point grid legs between task-graph nodes.
//!
//! Node 0 is the scenario start, node `k` is `tasks[k - 1]`. Every ordered
//! node pair gets one collision-free leg found by A*, optionally with a
//! per-turn cost so that equal-length staircases lose to straighter legs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::objectives::{path_length, smoothness, turning_count};
use crate::world::{save_scenario, Cell, GridMap, Scenario, DIRECTIONS};

#[derive(Debug, Error)]
pub enum LegError {
    #[error("no path from {from} to {to}")]
    NoPath { from: Cell, to: Cell },
    #[error("leg cache {path}: {reason}")]
    Cache { path: String, reason: String },
}

/// Default per-turn A* cost, as a multiple of the map resolution.
pub const DEFAULT_TURN_WEIGHT_CELLS: f64 = 0.3;

/// Heading slot used for the start state, which has no incoming heading.
const NO_HEADING: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    cell: Cell,
    heading: usize,
    g: f64,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed: BinaryHeap pops the smallest (f, h, col, row, heading).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.cell.col.cmp(&self.cell.col))
            .then_with(|| other.cell.row.cmp(&self.cell.row))
            .then_with(|| other.heading.cmp(&self.heading))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Path cost bookkeeping kept as hop counts so that the cost of a path is
/// independent of the order in which its steps were added.
#[derive(Debug, Clone, Copy, Default)]
struct Cost {
    orthogonal: u32,
    diagonal: u32,
    turns: u32,
}

impl Cost {
    fn value(&self, resolution: f64, turn_weight: f64) -> f64 {
        (self.orthogonal as f64 + self.diagonal as f64 * SQRT_2) * resolution + turn_weight * self.turns as f64
    }
}

/// `turn_table[a][b]`: moving in heading `b` after heading `a` is a turn
/// above `threshold`.
fn turn_table(threshold: f64) -> [[bool; 8]; 8] {
    let mut table = [[false; 8]; 8];
    for (a, row) in table.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            let (u, v) = (DIRECTIONS[a], DIRECTIONS[b]);
            let cross = (u.0 * v.1 - u.1 * v.0) as f64;
            let dot = (u.0 * v.0 + u.1 * v.1) as f64;
            *slot = cross.abs().atan2(dot) > threshold;
        }
    }
    table
}

/// Minimum-cost 8-connected path from `from` to `to`.
///
/// Cost is Euclidean step length plus `turn_weight` per heading change
/// above `turn_threshold`. With `turn_weight == 0` the result is a
/// shortest path. Ties pop in order of lower f, lower h, then smaller
/// (col, row).
pub fn astar(
    map: &GridMap,
    from: Cell,
    to: Cell,
    turn_weight: f64,
    turn_threshold: f64,
) -> Result<Vec<Cell>, LegError> {
    if map.is_blocked(from) || map.is_blocked(to) {
        return Err(LegError::NoPath { from, to });
    }
    if from == to {
        return Ok(vec![from]);
    }
    let res = map.resolution();
    let turn_aware = turn_weight > 0.0;
    let turns = turn_table(turn_threshold);
    let n_states = map.width() * map.height() * 9;
    let state = |c: Cell, heading: usize| map.index(c) * 9 + heading;
    let h = |c: Cell| {
        let dc = c.col.abs_diff(to.col) as f64;
        let dr = c.row.abs_diff(to.row) as f64;
        (dc * dc + dr * dr).sqrt() * res
    };

    let mut best = vec![f64::INFINITY; n_states];
    let mut cost = vec![Cost::default(); n_states];
    let mut parent = vec![usize::MAX; n_states];
    let mut closed = vec![false; n_states];
    let mut open = BinaryHeap::new();

    let s0 = state(from, NO_HEADING);
    best[s0] = 0.0;
    open.push(Open {
        f: h(from),
        h: h(from),
        cell: from,
        heading: NO_HEADING,
        g: 0.0,
    });

    while let Some(node) = open.pop() {
        let s = state(node.cell, node.heading);
        if closed[s] || node.g > best[s] {
            continue;
        }
        closed[s] = true;
        if node.cell == to {
            return Ok(reconstruct(map, &parent, s));
        }
        for (dir, &(dc, dr)) in DIRECTIONS.iter().enumerate() {
            let Some(next) = map.offset(node.cell, dc, dr) else {
                continue;
            };
            if !map.step_allowed(node.cell, next) {
                continue;
            }
            let mut c = cost[s];
            if dc != 0 && dr != 0 {
                c.diagonal += 1;
            } else {
                c.orthogonal += 1;
            }
            let heading = if turn_aware {
                if node.heading != NO_HEADING && turns[node.heading][dir] {
                    c.turns += 1;
                }
                dir
            } else {
                NO_HEADING
            };
            let ns = state(next, heading);
            let g = c.value(res, turn_weight);
            if g < best[ns] {
                best[ns] = g;
                cost[ns] = c;
                parent[ns] = s;
                let hn = h(next);
                open.push(Open {
                    f: g + hn,
                    h: hn,
                    cell: next,
                    heading,
                    g,
                });
            }
        }
    }
    Err(LegError::NoPath { from, to })
}

fn reconstruct(map: &GridMap, parent: &[usize], mut s: usize) -> Vec<Cell> {
    let mut path = vec![map.cell_at(s / 9)];
    while parent[s] != usize::MAX {
        s = parent[s];
        path.push(map.cell_at(s / 9));
    }
    path.reverse();
    path
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub from_node: usize,
    pub to_node: usize,
    pub cells: Vec<Cell>,
    /// Meters.
    pub length: f64,
    /// Heading changes above the turn threshold.
    pub turns: usize,
    /// Radians.
    pub smooth: f64,
}

impl Leg {
    fn new(from_node: usize, to_node: usize, cells: Vec<Cell>, resolution: f64, turn_threshold: f64) -> Self {
        Self {
            from_node,
            to_node,
            length: path_length(&cells, resolution),
            turns: turning_count(&cells, turn_threshold),
            smooth: smoothness(&cells),
            cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegMatrix {
    n_nodes: usize,
    /// Row-major `n_nodes x n_nodes`; the diagonal is `None`.
    legs: Vec<Option<Leg>>,
}

impl LegMatrix {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Leg from node `i` to node `j`. Panics on `i == j`.
    pub fn get(&self, i: usize, j: usize) -> &Leg {
        self.legs[i * self.n_nodes + j]
            .as_ref()
            .expect("no leg on the diagonal")
    }

    pub fn iter(&self) -> impl Iterator<Item = &Leg> {
        self.legs.iter().flatten()
    }
}

/// Legs for every ordered pair of distinct nodes. Pairs are solved in
/// parallel; the result does not depend on the thread count.
pub fn build_leg_matrix(scenario: &Scenario, turn_weight: f64, turn_threshold: f64) -> Result<LegMatrix, LegError> {
    let n = scenario.n_nodes();
    let map = scenario.map();
    let legs = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                return Ok(None);
            }
            let cells = astar(
                map,
                scenario.node_cell(i),
                scenario.node_cell(j),
                turn_weight,
                turn_threshold,
            )?;
            Ok(Some(Leg::new(i, j, cells, map.resolution(), turn_threshold)))
        })
        .collect::<Result<Vec<_>, LegError>>()?;
    Ok(LegMatrix { n_nodes: n, legs })
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    key: String,
    matrix: LegMatrix,
}

/// Content hash of everything a leg matrix depends on.
pub fn cache_key(scenario: &Scenario, turn_weight: f64, turn_threshold: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(save_scenario(scenario).as_bytes());
    hasher.update(turn_weight.to_bits().to_le_bytes());
    hasher.update(turn_threshold.to_bits().to_le_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads the matrix from `path` when its key matches, otherwise builds it
/// and rewrites the cache.
pub fn load_or_build_cached(
    path: &Path,
    scenario: &Scenario,
    turn_weight: f64,
    turn_threshold: f64,
) -> Result<LegMatrix, LegError> {
    let key = cache_key(scenario, turn_weight, turn_threshold);
    if let Ok(text) = std::fs::read_to_string(path) {
        if let Ok(file) = serde_json::from_str::<CacheFile>(&text) {
            if file.key == key {
                return Ok(file.matrix);
            }
        }
    }
    let matrix = build_leg_matrix(scenario, turn_weight, turn_threshold)?;
    let file = CacheFile { key, matrix };
    let text = serde_json::to_string(&file).expect("leg matrix serializes");
    std::fs::write(path, text).map_err(|e| LegError::Cache {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(file.matrix)
}
