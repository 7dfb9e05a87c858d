//! Comparative benchmark suites: every (scenario, algorithm, trial) cell is
//! planned with a seed derived from its coordinates, and the results are
//! written as a raw per-run CSV, an aggregate CSV with one row per
//! algorithm, and mean convergence traces for the iterative planners.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aco::{self, AcoParams, ConvergenceTrace, TraceRow};
use crate::baselines::{astar_greedy_plan, ga_plan, GaParams};
use crate::legs::{build_leg_matrix, LegMatrix};
use crate::route::{EvalSettings, Evaluator, PlanResult};
use crate::world::{generate_map, generate_scenario, load_map, read_text, Scenario, WorldError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Aco,
    AstarGreedy,
    Ga,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Aco => "aco",
            Algorithm::AstarGreedy => "astar_greedy",
            Algorithm::Ga => "ga",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapRef {
    File {
        path: PathBuf,
    },
    Generated {
        seed: u64,
        #[serde(default = "default_cells")]
        width: usize,
        #[serde(default = "default_cells")]
        height: usize,
        #[serde(default = "default_resolution")]
        resolution: f64,
        #[serde(default = "default_density")]
        density: f64,
    },
}

fn default_cells() -> usize {
    200
}
fn default_resolution() -> f64 {
    0.1
}
fn default_density() -> f64 {
    0.15
}
fn default_window_lo() -> f64 {
    5.0
}
fn default_window_hi() -> f64 {
    30.0
}
fn default_speed() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    1.0
}

impl MapRef {
    pub fn resolve(&self, base: Option<&Path>) -> Result<crate::world::GridMap, WorldError> {
        match self {
            MapRef::File { path } => {
                let p = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                load_map(&read_text(&p)?)
            }
            MapRef::Generated {
                seed,
                width,
                height,
                resolution,
                density,
            } => generate_map(*seed, *width, *height, *resolution, *density),
        }
    }
}

/// One generated scenario of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub map: MapRef,
    pub seed: u64,
    pub n_tasks: usize,
    #[serde(default = "default_window_lo")]
    pub window_lo: f64,
    #[serde(default = "default_window_hi")]
    pub window_hi: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Stretches every generated window about its start:
    /// `end = start + window_scale * (end - start)`. Below 1 tightens.
    #[serde(default = "default_scale")]
    pub window_scale: f64,
}

impl ScenarioSpec {
    pub fn build(&self, base: Option<&Path>) -> Result<Scenario, WorldError> {
        let map = self.map.resolve(base)?;
        let s = generate_scenario(
            self.seed,
            &map,
            self.n_tasks,
            self.window_lo,
            self.window_hi,
            self.speed,
        )?;
        if self.window_scale == 1.0 {
            Ok(s)
        } else {
            let k = self.window_scale;
            s.with_windows(|a, b| (a, a + k * (b - a)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Root of all trial seeds.
    pub seed: u64,
    pub scenarios: Vec<ScenarioSpec>,
    pub algorithms: Vec<Algorithm>,
    pub trials_per_cell: usize,
    pub aco: AcoParams,
    pub ga: GaParams,
    pub settings: EvalSettings,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenarios: Vec::new(),
            algorithms: vec![Algorithm::Aco, Algorithm::AstarGreedy, Algorithm::Ga],
            trials_per_cell: 50,
            aco: AcoParams::default(),
            ga: GaParams::default(),
            settings: EvalSettings::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if self.scenarios.is_empty() {
            return bad("at least one scenario is required");
        }
        self.aco
            .validate()
            .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        self.ga
            .validate()
            .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// Seed of one suite cell; adding algorithms or scenarios never changes
/// the seeds of existing cells.
pub fn trial_seed(config_seed: u64, scenario_index: usize, algorithm: Algorithm, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(config_seed.to_le_bytes());
    h.update((scenario_index as u64).to_le_bytes());
    h.update(algorithm.name().as_bytes());
    h.update((trial as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One planner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub scenario: usize,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub seed: u64,
    pub ok: bool,
    pub length_m: f64,
    pub travel_time_s: f64,
    pub compute_time_s: f64,
    pub turning_count: f64,
    pub smoothness_rad: f64,
    pub curvature_std: f64,
    pub completion_pct: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub error: String,
}

/// Mean and population standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Aggregate over every successful run of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: Algorithm,
    pub runs: usize,
    pub failed: usize,
    pub length_m: Stat,
    pub travel_time_s: Stat,
    pub compute_time_s: Stat,
    pub turning_count: Stat,
    pub smoothness_rad: Stat,
    pub curvature_std: Stat,
    pub completion_pct: Stat,
}

const AGGREGATE_HEADER: [&str; 17] = [
    "method",
    "runs",
    "failed",
    "length_m_mean",
    "length_m_std",
    "travel_time_s_mean",
    "travel_time_s_std",
    "compute_time_s_mean",
    "compute_time_s_std",
    "turning_count_mean",
    "turning_count_std",
    "smoothness_rad_mean",
    "smoothness_rad_std",
    "curvature_std_mean",
    "curvature_std_std",
    "completion_pct_mean",
    "completion_pct_std",
];

impl BenchRow {
    pub fn from_raw(method: Algorithm, rows: &[&RawRow]) -> Self {
        let ok: Vec<&RawRow> = rows.iter().copied().filter(|r| r.ok).collect();
        let col = |f: fn(&RawRow) -> f64| Stat::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            method,
            runs: ok.len(),
            failed: rows.len() - ok.len(),
            length_m: col(|r| r.length_m),
            travel_time_s: col(|r| r.travel_time_s),
            compute_time_s: col(|r| r.compute_time_s),
            turning_count: col(|r| r.turning_count),
            smoothness_rad: col(|r| r.smoothness_rad),
            curvature_std: col(|r| r.curvature_std),
            completion_pct: col(|r| r.completion_pct),
        }
    }

    fn record(&self) -> Vec<String> {
        let mut out = vec![self.method.to_string(), self.runs.to_string(), self.failed.to_string()];
        for s in [
            self.length_m,
            self.travel_time_s,
            self.compute_time_s,
            self.turning_count,
            self.smoothness_rad,
            self.curvature_std,
            self.completion_pct,
        ] {
            out.push(s.mean.to_string());
            out.push(s.std.to_string());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    /// Ordered by (scenario, algorithm as configured, trial).
    pub raw: Vec<RawRow>,
    pub aggregates: Vec<BenchRow>,
    /// Mean best-so-far trace per iterative algorithm.
    pub convergence: BTreeMap<Algorithm, ConvergenceTrace>,
}

struct RunResult {
    row: RawRow,
    trace: Option<ConvergenceTrace>,
}

fn run_one(
    eval: &Evaluator<'_>,
    config: &BenchConfig,
    algorithm: Algorithm,
    seed: u64,
) -> Result<(PlanResult, Option<ConvergenceTrace>, f64), String> {
    let clock = Instant::now();
    let out = match algorithm {
        Algorithm::Aco => {
            let params = AcoParams {
                seed,
                ..config.aco.clone()
            };
            aco::plan(eval, &params)
                .map(|o| (o.best, Some(o.trace)))
                .map_err(|e| e.to_string())
        }
        Algorithm::Ga => {
            let params = GaParams {
                seed,
                ..config.ga.clone()
            };
            ga_plan(eval, &params)
                .map(|o| (o.best, Some(o.trace)))
                .map_err(|e| e.to_string())
        }
        Algorithm::AstarGreedy => Ok((astar_greedy_plan(eval), None)),
    };
    let elapsed = clock.elapsed().as_secs_f64();
    out.map(|(plan, trace)| (plan, trace, elapsed))
}

fn failed_row(scenario: usize, algorithm: Algorithm, trial: usize, seed: u64, error: String) -> RawRow {
    RawRow {
        scenario,
        algorithm,
        trial,
        seed,
        ok: false,
        length_m: f64::NAN,
        travel_time_s: f64::NAN,
        compute_time_s: f64::NAN,
        turning_count: f64::NAN,
        smoothness_rad: f64::NAN,
        curvature_std: f64::NAN,
        completion_pct: f64::NAN,
        f: f64::NAN,
        error,
    }
}

/// Runs every cell of the suite. Planner failures become failed rows; only
/// configuration errors abort.
///
/// `base` resolves relative map paths.
pub fn run_suite(config: &BenchConfig, base: Option<&Path>) -> Result<SuiteOutput, BenchError> {
    config.validate()?;
    let mut results: Vec<RunResult> = Vec::new();

    for (si, spec) in config.scenarios.iter().enumerate() {
        let prepared = spec.build(base).map_err(|e| e.to_string()).and_then(|s| {
            let legs = build_leg_matrix(&s, config.settings.turn_weight(&s), config.settings.turn_threshold)
                .map_err(|e| e.to_string())?;
            Ok((s, legs))
        });
        let cells: Vec<(Algorithm, usize)> = config
            .algorithms
            .iter()
            .flat_map(|&a| (0..config.trials_per_cell).map(move |t| (a, t)))
            .collect();
        let rows: Vec<RunResult> = match &prepared {
            Err(e) => cells
                .iter()
                .map(|&(a, t)| RunResult {
                    row: failed_row(si, a, t, trial_seed(config.seed, si, a, t), e.clone()),
                    trace: None,
                })
                .collect(),
            Ok((scenario, legs)) => cells
                .par_iter()
                .map(|&(a, t)| run_cell(config, scenario, legs, si, a, t))
                .collect(),
        };
        results.extend(rows);
    }

    let raw: Vec<RawRow> = results.iter().map(|r| r.row.clone()).collect();
    let aggregates = aggregate(&raw, &config.algorithms);
    let mut convergence = BTreeMap::new();
    for &a in &config.algorithms {
        let traces: Vec<&ConvergenceTrace> = results
            .iter()
            .filter(|r| r.row.algorithm == a)
            .filter_map(|r| r.trace.as_ref())
            .collect();
        if let Some(mean) = mean_trace(&traces) {
            convergence.insert(a, mean);
        }
    }
    Ok(SuiteOutput {
        raw,
        aggregates,
        convergence,
    })
}

fn run_cell(
    config: &BenchConfig,
    scenario: &Scenario,
    legs: &LegMatrix,
    si: usize,
    algorithm: Algorithm,
    trial: usize,
) -> RunResult {
    let seed = trial_seed(config.seed, si, algorithm, trial);
    let weights = match algorithm {
        Algorithm::Ga => config.ga.weights,
        _ => config.aco.weights,
    };
    let eval = match Evaluator::new(scenario, legs, weights, config.settings) {
        Ok(e) => e,
        Err(e) => {
            return RunResult {
                row: failed_row(si, algorithm, trial, seed, e.to_string()),
                trace: None,
            }
        }
    };
    match run_one(&eval, config, algorithm, seed) {
        Ok((plan, trace, elapsed)) => RunResult {
            row: RawRow {
                scenario: si,
                algorithm,
                trial,
                seed,
                ok: true,
                length_m: plan.objectives.f1_length,
                travel_time_s: plan.objectives.f2_makespan,
                compute_time_s: elapsed,
                turning_count: plan.objectives.f3_turns as f64,
                smoothness_rad: plan.objectives.f4_smoothness,
                curvature_std: plan.objectives.curvature_std,
                completion_pct: 100.0 * plan.completion(),
                f: plan.f,
                error: String::new(),
            },
            trace,
        },
        Err(e) => RunResult {
            row: failed_row(si, algorithm, trial, seed, e),
            trace: None,
        },
    }
}

/// One aggregate row per algorithm, in `algorithms` order.
pub fn aggregate(raw: &[RawRow], algorithms: &[Algorithm]) -> Vec<BenchRow> {
    algorithms
        .iter()
        .map(|&a| {
            let rows: Vec<&RawRow> = raw.iter().filter(|r| r.algorithm == a).collect();
            BenchRow::from_raw(a, &rows)
        })
        .collect()
}

/// Element-wise mean of equally long traces.
pub fn mean_trace(traces: &[&ConvergenceTrace]) -> Option<ConvergenceTrace> {
    let first = traces.first()?;
    let n = traces.len() as f64;
    let rows = (0..first.rows.len())
        .map(|k| {
            let mean = |f: fn(&TraceRow) -> f64| traces.iter().map(|t| f(&t.rows[k])).sum::<f64>() / n;
            TraceRow {
                iteration: first.rows[k].iteration,
                best_f: mean(|r| r.best_f),
                best_length_m: mean(|r| r.best_length_m),
                best_completion: mean(|r| r.best_completion),
            }
        })
        .collect();
    Some(ConvergenceTrace { rows })
}

pub fn raw_csv(raw: &[RawRow]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in raw {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}

pub fn parse_raw_csv(text: &str) -> Result<Vec<RawRow>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<RawRow>, _>>()?)
}

pub fn aggregate_csv(rows: &[BenchRow]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}

/// Writes `raw.csv`, `aggregate.csv` and `convergence_<algo>.csv` into
/// `dir`, returning the paths written.
pub fn write_outputs(out: &SuiteOutput, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| BenchError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = vec![
        (dir.join("raw.csv"), raw_csv(&out.raw)?),
        (dir.join("aggregate.csv"), aggregate_csv(&out.aggregates)?),
    ];
    for (a, trace) in &out.convergence {
        files.push((dir.join(format!("convergence_{a}.csv")), trace.to_csv()));
    }
    for (path, text) in &files {
        std::fs::write(path, text).map_err(io(path))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
