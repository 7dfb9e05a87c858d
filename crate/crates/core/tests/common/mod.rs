//! Reference implementations used as oracles by the integration tests.
//! Each is written from the problem definition, not from library code.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use colonyroute::objectives::{FeasibilityReport, VisitStatus};
use colonyroute::world::{generate_map, generate_scenario};
use colonyroute::{Cell, GridMap, PlanResult, Scenario, WaitPolicy};
use rand::Rng;

/// Exact path cost `a + b * sqrt(2)` in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Surd {
    pub a: u64,
    pub b: u64,
}

impl Surd {
    pub fn meters(self, resolution: f64) -> f64 {
        (self.a as f64 + self.b as f64 * std::f64::consts::SQRT_2) * resolution
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        // Sign of (a1 - a2) + (b1 - b2) sqrt 2, using only integers.
        let da = self.a as i128 - other.a as i128;
        let db = self.b as i128 - other.b as i128;
        let sign = |x: i128| x.signum();
        match (sign(da), sign(db)) {
            (0, s) | (s, 0) => s.cmp(&0),
            (s1, s2) if s1 == s2 => s1.cmp(&0),
            // Opposite signs: compare da^2 against 2 db^2.
            (s1, _) => {
                let lhs = da * da;
                let rhs = 2 * db * db;
                if s1 > 0 {
                    lhs.cmp(&rhs)
                } else {
                    rhs.cmp(&lhs)
                }
            }
        }
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected move legality with no corner cutting.
pub fn legal_step(map: &GridMap, a: Cell, b: Cell) -> bool {
    let dc = b.col as i64 - a.col as i64;
    let dr = b.row as i64 - a.row as i64;
    if dc.abs() > 1 || dr.abs() > 1 || (dc == 0 && dr == 0) {
        return false;
    }
    if !map.in_bounds(b) || map.is_blocked(a) || map.is_blocked(b) {
        return false;
    }
    if dc != 0 && dr != 0 {
        let side1 = Cell::new(b.col, a.row);
        let side2 = Cell::new(a.col, b.row);
        return map.is_free(side1) && map.is_free(side2);
    }
    true
}

fn neighbors(map: &GridMap, c: Cell) -> Vec<(Cell, bool)> {
    let mut out = Vec::new();
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            let (col, row) = (c.col as i64 + dc, c.row as i64 + dr);
            if (dc, dr) == (0, 0) || col < 0 || row < 0 {
                continue;
            }
            let n = Cell::new(col as usize, row as usize);
            if map.in_bounds(n) && legal_step(map, c, n) {
                out.push((n, dc != 0 && dr != 0));
            }
        }
    }
    out
}

/// Exact shortest path cost by Dijkstra over surds; `None` if unreachable.
pub fn dijkstra(map: &GridMap, from: Cell, to: Cell) -> Option<Surd> {
    let idx = |c: Cell| c.row * map.width() + c.col;
    let mut dist: Vec<Option<Surd>> = vec![None; map.width() * map.height()];
    let mut heap = BinaryHeap::new();
    dist[idx(from)] = Some(Surd::default());
    heap.push(std::cmp::Reverse((Surd::default(), from.col, from.row)));
    while let Some(std::cmp::Reverse((d, col, row))) = heap.pop() {
        let c = Cell::new(col, row);
        if dist[idx(c)] != Some(d) {
            continue;
        }
        if c == to {
            return Some(d);
        }
        for (n, diag) in neighbors(map, c) {
            let nd = if diag {
                Surd { a: d.a, b: d.b + 1 }
            } else {
                Surd { a: d.a + 1, b: d.b }
            };
            if dist[idx(n)].is_none_or(|old| nd < old) {
                dist[idx(n)] = Some(nd);
                heap.push(std::cmp::Reverse((nd, n.col, n.row)));
            }
        }
    }
    None
}

/// Path is non-empty, starts at `start`, and every step is a legal move or
/// a wait.
pub fn check_connected(map: &GridMap, start: Cell, points: &[Cell]) -> Result<(), String> {
    if points.first() != Some(&start) {
        return Err("does not begin at the start cell".into());
    }
    for (i, p) in points.iter().enumerate() {
        if !map.in_bounds(*p) || map.is_blocked(*p) {
            return Err(format!("point {i} {p:?} is blocked or outside the map"));
        }
    }
    for (i, w) in points.windows(2).enumerate() {
        if w[0] != w[1] && !legal_step(map, w[0], w[1]) {
            return Err(format!("illegal step {i}: {:?} -> {:?}", w[0], w[1]));
        }
    }
    Ok(())
}

/// Expected report from replaying the route timeline: drive the points,
/// stop at each route task the first time its cell is reached after the
/// previous stop, wait for the window if allowed, and judge the visit.
pub fn replay_report(scenario: &Scenario, plan: &PlanResult, wait: WaitPolicy) -> Vec<(u32, Option<f64>, VisitStatus)> {
    let res = scenario.map().resolution();
    let points = &plan.trajectory.points;
    let mut pending = plan.visit_order.iter().peekable();
    let mut visits: Vec<(u32, f64)> = Vec::new();
    let mut clock = 0.0;
    let (mut orth, mut diag) = (0u64, 0u64);
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        if w[0].col != w[1].col && w[0].row != w[1].row {
            diag += 1;
        } else {
            orth += 1;
        }
        let Some(&&id) = pending.peek() else { break };
        let task = scenario.task_by_id(id).expect("route ids exist");
        if w[1] == task.cell {
            let travel = Surd { a: orth, b: diag }.meters(res) / scenario.speed();
            let mut t = clock + travel;
            if wait == WaitPolicy::Allow && t < task.window_start {
                t = task.window_start;
            }
            visits.push((id, t));
            clock = t;
            orth = 0;
            diag = 0;
            pending.next();
        }
    }
    scenario
        .tasks()
        .iter()
        .map(|task| match visits.iter().find(|v| v.0 == task.id) {
            None => (task.id, None, VisitStatus::Unvisited),
            Some(&(_, t)) => {
                let status = if t < task.window_start {
                    VisitStatus::MissedEarly
                } else if t > task.window_end {
                    VisitStatus::MissedLate
                } else {
                    VisitStatus::Met
                };
                (task.id, Some(t), status)
            }
        })
        .collect()
}

/// Compares a report against the replay oracle with `tol` on times.
pub fn report_matches(
    report: &FeasibilityReport,
    expected: &[(u32, Option<f64>, VisitStatus)],
    tol: f64,
) -> Result<(), String> {
    if report.tasks.len() != expected.len() {
        return Err("task count differs".into());
    }
    for (got, want) in report.tasks.iter().zip(expected) {
        let time_ok = match (got.arrival_s, want.1) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= tol,
            _ => false,
        };
        if got.task_id != want.0 || got.status != want.2 || !time_ok {
            return Err(format!("task {}: got {:?}, replay {:?}", want.0, got, want));
        }
    }
    let met = expected.iter().filter(|e| e.2 == VisitStatus::Met).count();
    let frac = met as f64 / expected.len() as f64;
    if report.completion_fraction != frac {
        return Err(format!(
            "completion {} but replay gives {frac}",
            report.completion_fraction
        ));
    }
    Ok(())
}

/// Random small scenario; retries map seeds until tasks fit.
pub fn fuzz_scenario(rng: &mut impl Rng) -> Scenario {
    loop {
        let w = rng.gen_range(4..=24);
        let h = rng.gen_range(4..=24);
        let res = [0.05, 0.1, 0.25, 1.0][rng.gen_range(0..4)];
        let density = rng.gen_range(0.0..0.35);
        let n_tasks = rng.gen_range(1..=6);
        let lo = rng.gen_range(0.0..10.0);
        let hi = lo + rng.gen_range(1.0..60.0);
        let speed = rng.gen_range(0.2..2.0);
        let Ok(map) = generate_map(rng.gen(), w, h, res, density) else {
            continue;
        };
        if let Ok(s) = generate_scenario(rng.gen(), &map, n_tasks, lo, hi, speed) {
            return s;
        }
    }
}
