//! Occupancy grids, planning scenarios, their on-disk formats, and the
//! seeded generators used by the benchmark harness.
//!
//! Map text format:
//!
//! ```text
//! map <width> <height> <resolution>
//! ..#.
//! ....
//! ```
//!
//! `#` is blocked, `.` is free, row 0 is the top line. Scenarios are JSON
//! objects with `map` (inline map text or a file path), `start`,
//! `speed_mps` and `tasks`.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::SQRT_2;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default robot speed in meters per second.
pub const DEFAULT_SPEED_MPS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("malformed map header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown cell character {ch:?} at col {col}, row {row}")]
    UnknownCell { ch: char, col: usize, row: usize },
    #[error("task {0}: window start must be < window end and >= 0")]
    InvalidWindow(u32),
    #[error("{what} at {cell} is blocked")]
    BlockedCell { what: String, cell: Cell },
    #[error("{what} at {cell} is outside the map")]
    OutOfBounds { what: String, cell: Cell },
    #[error("task {0} is unreachable from the start cell")]
    Unreachable(u32),
    #[error("duplicate task id {0}")]
    DuplicateId(u32),
    #[error("task {0} shares its cell with the start or another task")]
    DuplicateCell(u32),
    #[error("scenario has no tasks")]
    NoTasks,
    #[error("speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
    #[error("need {needed} mutually reachable free cells, map offers {available}")]
    InsufficientFreeCells { needed: usize, available: usize },
    #[error("invalid generator argument: {0}")]
    InvalidArgument(String),
    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Grid coordinate, serialized as `[col, row]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

impl From<[usize; 2]> for Cell {
    fn from([col, row]: [usize; 2]) -> Self {
        Self { col, row }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    occupancy: Vec<bool>,
}

impl GridMap {
    /// All-free map.
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self, WorldError> {
        Self::from_occupancy(width, height, resolution, vec![false; width * height])
    }

    /// `occupancy` is row-major, `true` = blocked.
    pub fn from_occupancy(
        width: usize,
        height: usize,
        resolution: f64,
        occupancy: Vec<bool>,
    ) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::MalformedHeader(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(WorldError::MalformedHeader(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if occupancy.len() != width * height {
            return Err(WorldError::DimensionMismatch(format!(
                "expected {} cells, got {}",
                width * height,
                occupancy.len()
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            occupancy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Meters per cell.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Length of the map diagonal in meters.
    pub fn diagonal_m(&self) -> f64 {
        let (w, h) = (self.width as f64, self.height as f64);
        (w * w + h * h).sqrt() * self.resolution
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col < self.width && c.row < self.height
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.occupancy[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_blocked(c)
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        let i = self.index(c);
        self.occupancy[i] = blocked;
    }

    pub fn index(&self, c: Cell) -> usize {
        c.row * self.width + c.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn blocked_count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.occupancy.len())
            .filter(|&i| !self.occupancy[i])
            .map(|i| self.cell_at(i))
    }

    /// Free 8-connected neighbors of `c` with their step lengths in meters.
    ///
    /// A diagonal move is only allowed when both orthogonally adjacent cells
    /// it would sweep past are free.
    pub fn neighbors(&self, c: Cell) -> Vec<(Cell, f64)> {
        let mut out = Vec::with_capacity(8);
        if self.is_blocked(c) {
            return out;
        }
        for &(dc, dr) in &DIRECTIONS {
            if let Some(n) = self.offset(c, dc, dr) {
                if self.step_allowed(c, n) {
                    let len = if dc != 0 && dr != 0 {
                        self.resolution * SQRT_2
                    } else {
                        self.resolution
                    };
                    out.push((n, len));
                }
            }
        }
        out
    }

    /// True when `to` is one of `from`'s 8 neighbors and the move between
    /// them is legal (both free, no corner cutting).
    pub fn step_allowed(&self, from: Cell, to: Cell) -> bool {
        let dc = to.col as isize - from.col as isize;
        let dr = to.row as isize - from.row as isize;
        if (dc == 0 && dr == 0) || dc.abs() > 1 || dr.abs() > 1 {
            return false;
        }
        if self.is_blocked(from) || self.is_blocked(to) {
            return false;
        }
        if dc != 0 && dr != 0 {
            let side_a = Cell::new(to.col, from.row);
            let side_b = Cell::new(from.col, to.row);
            if self.is_blocked(side_a) || self.is_blocked(side_b) {
                return false;
            }
        }
        true
    }

    pub(crate) fn offset(&self, c: Cell, dc: isize, dr: isize) -> Option<Cell> {
        let col = c.col.checked_add_signed(dc)?;
        let row = c.row.checked_add_signed(dr)?;
        let n = Cell::new(col, row);
        self.in_bounds(n).then_some(n)
    }

    /// Free cells reachable from `from` (including itself), as a flag per
    /// cell index.
    pub fn reachable_from(&self, from: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.occupancy.len()];
        if self.is_blocked(from) {
            return seen;
        }
        let mut queue = VecDeque::new();
        seen[self.index(from)] = true;
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            for (n, _) in self.neighbors(c) {
                let i = self.index(n);
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Cells of the largest connected free region; ties go to the region
    /// containing the lowest cell index.
    pub fn largest_free_region(&self) -> Vec<Cell> {
        let mut label = vec![usize::MAX; self.occupancy.len()];
        let mut best: Vec<Cell> = Vec::new();
        for start in 0..self.occupancy.len() {
            if self.occupancy[start] || label[start] != usize::MAX {
                continue;
            }
            let mut region = Vec::new();
            let mut queue = VecDeque::from([self.cell_at(start)]);
            label[start] = start;
            while let Some(c) = queue.pop_front() {
                region.push(c);
                for (n, _) in self.neighbors(c) {
                    let i = self.index(n);
                    if label[i] == usize::MAX {
                        label[i] = start;
                        queue.push_back(n);
                    }
                }
            }
            if region.len() > best.len() {
                best = region;
            }
        }
        best.sort_by_key(|c| self.index(*c));
        best
    }
}

/// Offsets in (col, row) order: N, NE, E, SE, S, SW, W, NW. Row grows
/// downward, so "north" is row - 1.
pub(crate) const DIRECTIONS: [(isize, isize); 8] =
    [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

pub fn load_map(text: &str) -> Result<GridMap, WorldError> {
    let mut lines = text.split('\n');
    let header = lines
        .next()
        .ok_or_else(|| WorldError::MalformedHeader("empty input".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (width, height, resolution) = match fields.as_slice() {
        ["map", w, h, r] => {
            let w: usize = w
                .parse()
                .map_err(|_| WorldError::MalformedHeader(format!("bad width {w:?}")))?;
            let h: usize = h
                .parse()
                .map_err(|_| WorldError::MalformedHeader(format!("bad height {h:?}")))?;
            let r: f64 = r
                .parse()
                .map_err(|_| WorldError::MalformedHeader(format!("bad resolution {r:?}")))?;
            (w, h, r)
        }
        _ => {
            return Err(WorldError::MalformedHeader(format!(
                "expected `map <width> <height> <resolution>`, got {header:?}"
            )))
        }
    };
    if width == 0 || height == 0 || !(resolution > 0.0 && resolution.is_finite()) {
        return Err(WorldError::MalformedHeader(format!(
            "dimensions and resolution must be positive: {header:?}"
        )));
    }

    let mut rows: Vec<&str> = lines.collect();
    // A single trailing newline is allowed.
    if rows.last() == Some(&"") {
        rows.pop();
    }
    if rows.len() != height {
        return Err(WorldError::DimensionMismatch(format!(
            "expected {height} rows, found {}",
            rows.len()
        )));
    }
    let mut occupancy = Vec::with_capacity(width * height);
    for (row, line) in rows.iter().enumerate() {
        let mut n = 0;
        for (col, ch) in line.chars().enumerate() {
            occupancy.push(match ch {
                '#' => true,
                '.' => false,
                ch => return Err(WorldError::UnknownCell { ch, col, row }),
            });
            n += 1;
        }
        if n != width {
            return Err(WorldError::DimensionMismatch(format!(
                "row {row} has {n} cells, expected {width}"
            )));
        }
    }
    GridMap::from_occupancy(width, height, resolution, occupancy)
}

pub fn save_map(map: &GridMap) -> String {
    let mut out = String::with_capacity((map.width + 1) * map.height + 32);
    out.push_str(&format!("map {} {} {}\n", map.width, map.height, map.resolution));
    for row in map.occupancy.chunks(map.width) {
        out.extend(row.iter().map(|&b| if b { '#' } else { '.' }));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u32,
    pub cell: Cell,
    pub window_start: f64,
    pub window_end: f64,
}

impl Task {
    pub fn window_contains(&self, t: f64) -> bool {
        self.window_start <= t && t <= self.window_end
    }
}

/// One planning problem. Construct through [`Scenario::new`] so every
/// invariant is checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    map: GridMap,
    start: Cell,
    speed: f64,
    tasks: Vec<Task>,
}

impl Scenario {
    pub fn new(map: GridMap, start: Cell, speed: f64, tasks: Vec<Task>) -> Result<Self, WorldError> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(WorldError::InvalidSpeed(speed));
        }
        if tasks.is_empty() {
            return Err(WorldError::NoTasks);
        }
        check_cell(&map, start, "start")?;
        let mut ids = HashSet::new();
        let mut cells = HashSet::from([start]);
        for t in &tasks {
            if !ids.insert(t.id) {
                return Err(WorldError::DuplicateId(t.id));
            }
            if !(t.window_start >= 0.0 && t.window_start < t.window_end) {
                return Err(WorldError::InvalidWindow(t.id));
            }
            check_cell(&map, t.cell, &format!("task {}", t.id))?;
            if !cells.insert(t.cell) {
                return Err(WorldError::DuplicateCell(t.id));
            }
        }
        let reach = map.reachable_from(start);
        if let Some(t) = tasks.iter().find(|t| !reach[map.index(t.cell)]) {
            return Err(WorldError::Unreachable(t.id));
        }
        Ok(Self {
            map,
            start,
            speed,
            tasks,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    /// Meters per second.
    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    /// Number of task-graph nodes: the start plus one per task.
    pub fn n_nodes(&self) -> usize {
        self.tasks.len() + 1
    }

    /// Cell of task-graph node `node` (0 = start, k = `tasks[k - 1]`).
    pub fn node_cell(&self, node: usize) -> Cell {
        if node == 0 {
            self.start
        } else {
            self.tasks[node - 1].cell
        }
    }

    pub fn task_by_id(&self, id: u32) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Copy with every window transformed by `f(start, end)`; the result
    /// is re-validated.
    pub fn with_windows(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Result<Self, WorldError> {
        let tasks = self
            .tasks
            .iter()
            .map(|t| {
                let (window_start, window_end) = f(t.window_start, t.window_end);
                Task {
                    window_start,
                    window_end,
                    ..t.clone()
                }
            })
            .collect();
        Scenario::new(self.map.clone(), self.start, self.speed, tasks)
    }
}

fn check_cell(map: &GridMap, c: Cell, what: &str) -> Result<(), WorldError> {
    if !map.in_bounds(c) {
        return Err(WorldError::OutOfBounds {
            what: what.to_string(),
            cell: c,
        });
    }
    if map.is_blocked(c) {
        return Err(WorldError::BlockedCell {
            what: what.to_string(),
            cell: c,
        });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    map: String,
    start: Cell,
    #[serde(default = "default_speed")]
    speed_mps: f64,
    tasks: Vec<TaskFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    id: u32,
    cell: Cell,
    window: [f64; 2],
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_MPS
}

fn is_inline_map(s: &str) -> bool {
    s.starts_with("map ")
}

/// Parses scenario JSON whose `map` field holds inline map text. Use
/// [`load_scenario_file`] when the map may be a path.
pub fn load_scenario(text: &str) -> Result<Scenario, WorldError> {
    load_scenario_with_base(text, None)
}

/// Loads a scenario file; a `map` path is resolved relative to the
/// scenario's directory.
pub fn load_scenario_file(path: &Path) -> Result<Scenario, WorldError> {
    let text = read_text(path)?;
    load_scenario_with_base(&text, path.parent())
}

fn load_scenario_with_base(text: &str, base: Option<&Path>) -> Result<Scenario, WorldError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    let map = if is_inline_map(&file.map) {
        load_map(&file.map)?
    } else {
        let p = Path::new(&file.map);
        let p = match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        load_map(&read_text(&p)?)?
    };
    let tasks = file
        .tasks
        .into_iter()
        .map(|t| Task {
            id: t.id,
            cell: t.cell,
            window_start: t.window[0],
            window_end: t.window[1],
        })
        .collect();
    Scenario::new(map, file.start, file.speed_mps, tasks)
}

/// Serializes with the map inlined, so the output is self-contained.
pub fn save_scenario(s: &Scenario) -> String {
    let file = ScenarioFile {
        map: save_map(&s.map),
        start: s.start,
        speed_mps: s.speed,
        tasks: s
            .tasks
            .iter()
            .map(|t| TaskFile {
                id: t.id,
                cell: t.cell,
                window: [t.window_start, t.window_end],
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("scenario serializes");
    out.push('\n');
    out
}

pub(crate) fn read_text(path: &Path) -> Result<String, WorldError> {
    std::fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Random warehouse-like map: axis-aligned "shelf" rectangles with sides
/// of 2..=10 cells are dropped until at least `density` of the cells are
/// blocked.
pub fn generate_map(
    seed: u64,
    width: usize,
    height: usize,
    resolution: f64,
    density: f64,
) -> Result<GridMap, WorldError> {
    if !(0.0..=0.9).contains(&density) {
        return Err(WorldError::InvalidArgument(format!(
            "obstacle density must be in [0, 0.9], got {density}"
        )));
    }
    let mut map = GridMap::new(width, height, resolution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = (density * (width * height) as f64).ceil() as usize;
    let mut blocked = 0;
    while blocked < target {
        let w = rng.gen_range(2..=10usize).min(width);
        let h = rng.gen_range(2..=10usize).min(height);
        let col0 = rng.gen_range(0..=width - w);
        let row0 = rng.gen_range(0..=height - h);
        for row in row0..row0 + h {
            for col in col0..col0 + w {
                let c = Cell::new(col, row);
                if !map.is_blocked(c) {
                    map.set_blocked(c, true);
                    blocked += 1;
                }
            }
        }
    }
    Ok(map)
}

/// Seeded scenario: `n_tasks` distinct cells plus a start cell, all drawn
/// from the map's largest connected free region.
///
/// Windows: start uniform in `[window_lo, window_hi - 1]`, end uniform in
/// `(start, window_hi]`. Task ids are `1..=n_tasks`.
pub fn generate_scenario(
    seed: u64,
    map: &GridMap,
    n_tasks: usize,
    window_lo: f64,
    window_hi: f64,
    speed: f64,
) -> Result<Scenario, WorldError> {
    if n_tasks == 0 {
        return Err(WorldError::NoTasks);
    }
    if !(window_lo >= 0.0 && window_hi - 1.0 >= window_lo && window_hi.is_finite()) {
        return Err(WorldError::InvalidArgument(format!(
            "window range [{window_lo}, {window_hi}] must satisfy 0 <= lo <= hi - 1"
        )));
    }
    let mut region = map.largest_free_region();
    if region.len() < n_tasks + 1 {
        return Err(WorldError::InsufficientFreeCells {
            needed: n_tasks + 1,
            available: region.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (picked, _) = region.partial_shuffle(&mut rng, n_tasks + 1);
    let start = picked[0];
    let tasks = picked[1..]
        .iter()
        .enumerate()
        .map(|(k, &cell)| {
            let window_start = rng.gen_range(window_lo..=window_hi - 1.0);
            // gen::<f64>() is in [0, 1), so the end lands in (start, hi].
            let window_end = window_hi - rng.gen::<f64>() * (window_hi - window_start);
            Task {
                id: k as u32 + 1,
                cell,
                window_start,
                window_end,
            }
        })
        .collect();
    Scenario::new(map.clone(), start, speed, tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_by_one() {
        let m = load_map("map 2 1 0.1\n.#").unwrap();
        assert_eq!((m.width(), m.height()), (2, 1));
        assert!(m.is_free(Cell::new(0, 0)));
        assert!(m.is_blocked(Cell::new(1, 0)));
    }

    #[test]
    fn parses_single_free_cell() {
        let m = load_map("map 1 1 0.1\n.").unwrap();
        assert_eq!(m.blocked_count(), 0);
        assert_eq!(m.resolution(), 0.1);
    }

    #[test]
    fn save_formats() {
        let m = GridMap::new(1, 1, 0.1).unwrap();
        assert_eq!(save_map(&m), "map 1 1 0.1\n.\n");
        let m = load_map("map 2 1 0.1\n.#").unwrap();
        assert_eq!(save_map(&m), "map 2 1 0.1\n.#\n");
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        let text = "map 2 2 0.1\n..\n..\n";
        assert_eq!(save_map(&load_map(text).unwrap()), text);
    }

    #[test]
    fn map_errors() {
        assert!(matches!(load_map(""), Err(WorldError::MalformedHeader(_))));
        assert!(matches!(
            load_map("grid 1 1 0.1\n."),
            Err(WorldError::MalformedHeader(_))
        ));
        assert!(matches!(load_map("map 1 1 -1\n."), Err(WorldError::MalformedHeader(_))));
        assert!(matches!(load_map("map 0 1 0.1\n"), Err(WorldError::MalformedHeader(_))));
        assert!(matches!(
            load_map("map 2 1 0.1\n."),
            Err(WorldError::DimensionMismatch(_))
        ));
        assert!(matches!(
            load_map("map 1 2 0.1\n."),
            Err(WorldError::DimensionMismatch(_))
        ));
        assert!(matches!(
            load_map("map 2 1 0.1\n.x"),
            Err(WorldError::UnknownCell {
                ch: 'x',
                col: 1,
                row: 0
            })
        ));
    }

    #[test]
    fn open_center_has_eight_neighbors() {
        let m = GridMap::new(3, 3, 0.1).unwrap();
        let n = m.neighbors(Cell::new(1, 1));
        assert_eq!(n.len(), 8);
        let diag = n.iter().filter(|(_, l)| *l > 0.1).count();
        assert_eq!(diag, 4);
        assert!(n.iter().all(|(_, l)| *l == 0.1 || *l == 0.1 * SQRT_2));
    }

    #[test]
    fn no_corner_cutting() {
        // East (2,1) and north (1,0) of the center are blocked.
        let m = load_map("map 3 3 1\n.#.\n..#\n...").unwrap();
        let n: Vec<Cell> = m.neighbors(Cell::new(1, 1)).into_iter().map(|(c, _)| c).collect();
        assert!(!n.contains(&Cell::new(2, 0)));
        assert!(!n.contains(&Cell::new(2, 2)), "SE sweeps past blocked east");
        assert!(!n.contains(&Cell::new(0, 0)), "NW sweeps past blocked north");
        assert!(n.contains(&Cell::new(0, 2)));
    }

    #[test]
    fn blocked_cell_has_no_neighbors() {
        let m = load_map("map 2 1 1\n.#").unwrap();
        assert!(m.neighbors(Cell::new(1, 0)).is_empty());
    }

    fn tiny_scenario_json(task_cell: [usize; 2]) -> String {
        format!(
            r#"{{"map": "map 3 2 0.1\n.#.\n...\n", "start": [0, 0], "speed_mps": 1.0,
                "tasks": [{{"id": 1, "cell": {:?}, "window": [5.0, 30.0]}}]}}"#,
            task_cell
        )
    }

    #[test]
    fn loads_valid_scenario() {
        let s = load_scenario(&tiny_scenario_json([2, 0])).unwrap();
        assert_eq!(s.tasks().len(), 1);
        assert_eq!(s.tasks()[0].window_start, 5.0);
        assert_eq!(s.tasks()[0].window_end, 30.0);
        assert_eq!(load_scenario(&save_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn task_on_obstacle_is_rejected() {
        let err = load_scenario(&tiny_scenario_json([1, 0])).unwrap_err();
        assert!(matches!(err, WorldError::BlockedCell { .. }), "{err}");
    }

    #[test]
    fn scenario_validation_errors() {
        let map = load_map("map 3 1 1\n.#.").unwrap();
        let task = |id, col, ws, we| Task {
            id,
            cell: Cell::new(col, 0),
            window_start: ws,
            window_end: we,
        };
        let s = Scenario::new(map.clone(), Cell::new(0, 0), 1.0, vec![task(1, 2, 0.0, 1.0)]);
        assert!(matches!(s, Err(WorldError::Unreachable(1))));

        let open = GridMap::new(4, 1, 1.0).unwrap();
        let s = Scenario::new(open.clone(), Cell::new(0, 0), 1.0, vec![task(1, 2, 3.0, 3.0)]);
        assert!(matches!(s, Err(WorldError::InvalidWindow(1))));
        let s = Scenario::new(
            open.clone(),
            Cell::new(0, 0),
            1.0,
            vec![task(4, 2, 0.0, 3.0), task(4, 3, 0.0, 3.0)],
        );
        assert!(matches!(s, Err(WorldError::DuplicateId(4))));
        let s = Scenario::new(open.clone(), Cell::new(0, 0), 1.0, vec![task(1, 0, 0.0, 3.0)]);
        assert!(matches!(s, Err(WorldError::DuplicateCell(1))));
        let s = Scenario::new(open.clone(), Cell::new(0, 0), 0.0, vec![task(1, 1, 0.0, 3.0)]);
        assert!(matches!(s, Err(WorldError::InvalidSpeed(_))));
        let s = Scenario::new(open, Cell::new(0, 0), 1.0, vec![]);
        assert!(matches!(s, Err(WorldError::NoTasks)));
    }

    #[test]
    fn generator_is_deterministic_and_respects_windows() {
        let map = GridMap::new(200, 200, 0.1).unwrap();
        let a = generate_scenario(1, &map, 5, 5.0, 30.0, 1.0).unwrap();
        let b = generate_scenario(1, &map, 5, 5.0, 30.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tasks().len(), 5);
        for t in a.tasks() {
            assert!(5.0 <= t.window_start && t.window_start < t.window_end && t.window_end <= 30.0);
            assert!(t.window_start <= 29.0);
        }
        let c = generate_scenario(2, &map, 5, 5.0, 30.0, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_pigeonhole() {
        let map = GridMap::new(2, 2, 0.1).unwrap();
        assert!(matches!(
            generate_scenario(1, &map, 5, 5.0, 30.0, 1.0),
            Err(WorldError::InsufficientFreeCells {
                needed: 6,
                available: 4
            })
        ));
    }

    #[test]
    fn generated_map_hits_density() {
        let m = generate_map(3, 200, 200, 0.1, 0.15).unwrap();
        let frac = m.blocked_count() as f64 / 40_000.0;
        assert!((0.15..0.16).contains(&frac), "{frac}");
        assert_eq!(m, generate_map(3, 200, 200, 0.1, 0.15).unwrap());
        assert!((m.diagonal_m() - 20.0 * SQRT_2).abs() < 1e-9);
    }
}
