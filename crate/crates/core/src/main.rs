use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use colonyroute::aco::{self, AcoParams, ConvergenceTrace};
use colonyroute::baselines::{astar_greedy_plan, ga_plan, GaParams};
use colonyroute::bench::{run_suite, write_outputs, BenchConfig};
use colonyroute::legs::build_leg_matrix;
use colonyroute::route::{EvalSettings, Evaluator, PlanResult};
use colonyroute::world::{generate_map, generate_scenario, load_map, load_scenario_file, save_map, save_scenario};

const THREADS_ENV: &str = "COLONYROUTE_THREADS";

#[derive(Parser)]
#[command(
    name = "colonyroute",
    version,
    about = "Ant colony path planning for logistics robots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Aco,
    #[value(name = "astar_greedy")]
    AstarGreedy,
    Ga,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write the result as JSON.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// ACO or GA parameter JSON; `seed` is overridden by --seed.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Turn threshold, wait policy, leg turn weight, norms.
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Convergence CSV (aco and ga only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate a random shelf map.
    GenMap {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        width: usize,
        #[arg(long, default_value_t = 200)]
        height: usize,
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        #[arg(long, default_value_t = 0.15)]
        density: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a scenario with random tasks and time windows on a map.
    GenScenario {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(5..=20))]
        tasks: u32,
        #[arg(long, default_value_t = 5.0)]
        window_lo: f64,
        #[arg(long, default_value_t = 30.0)]
        window_hi: f64,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a comparative benchmark suite.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
}

enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(ctx: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{ctx}: {e}"))
}

fn internal<E: std::fmt::Display>(ctx: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Internal(format!("{ctx}: {e}"))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let ctx = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{ctx}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{ctx}: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn configure_threads() -> Result<(), CliError> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|e| CliError::Input(format!("{THREADS_ENV}={v:?}: {e}")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(internal("thread pool"))
}

#[derive(Serialize)]
struct PlanFile<'a> {
    algorithm: &'static str,
    seed: u64,
    #[serde(flatten)]
    plan: &'a PlanResult,
}

#[allow(clippy::too_many_arguments)]
fn cmd_plan(
    scenario: &Path,
    algo: Algo,
    seed: u64,
    params: Option<&Path>,
    settings: Option<&Path>,
    out: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<(), CliError> {
    let scenario = load_scenario_file(scenario).map_err(input("scenario"))?;
    let settings: EvalSettings = settings.map(read_json).transpose()?.unwrap_or_default();
    if matches!(algo, Algo::AstarGreedy) && trace_out.is_some() {
        return Err(CliError::Input("--trace is only available for aco and ga".into()));
    }
    let legs = build_leg_matrix(&scenario, settings.turn_weight(&scenario), settings.turn_threshold)
        .map_err(internal("leg matrix"))?;

    let (name, plan, trace): (&'static str, PlanResult, Option<ConvergenceTrace>) = match algo {
        Algo::Aco => {
            let mut p: AcoParams = params.map(read_json).transpose()?.unwrap_or_default();
            p.seed = seed;
            p.validate().map_err(input("params"))?;
            let eval = Evaluator::new(&scenario, &legs, p.weights, settings).map_err(input("settings"))?;
            let o = aco::plan(&eval, &p).map_err(internal("aco"))?;
            ("aco", o.best, Some(o.trace))
        }
        Algo::Ga => {
            let mut p: GaParams = params.map(read_json).transpose()?.unwrap_or_default();
            p.seed = seed;
            p.validate().map_err(input("params"))?;
            let eval = Evaluator::new(&scenario, &legs, p.weights, settings).map_err(input("settings"))?;
            let o = ga_plan(&eval, &p).map_err(internal("ga"))?;
            ("ga", o.best, Some(o.trace))
        }
        Algo::AstarGreedy => {
            let weights = match params {
                Some(path) => read_json::<AcoParams>(path)?.weights,
                None => Default::default(),
            };
            let eval = Evaluator::new(&scenario, &legs, weights, settings).map_err(input("settings"))?;
            ("astar_greedy", astar_greedy_plan(&eval), None)
        }
    };

    if let Some(path) = out {
        let file = PlanFile {
            algorithm: name,
            seed,
            plan: &plan,
        };
        let mut text = serde_json::to_string_pretty(&file).map_err(internal("result json"))?;
        text.push('\n');
        write_file(path, &text)?;
    }
    if let (Some(path), Some(trace)) = (trace_out, trace) {
        write_file(path, &trace.to_csv())?;
    }
    println!(
        "{name} seed={seed} met={}/{} F={:.6} length_m={:.3} makespan_s={:.3} turns={} smoothness_rad={:.4}",
        plan.feasibility.met_count(),
        scenario.tasks().len(),
        plan.f,
        plan.objectives.f1_length,
        plan.objectives.f2_makespan,
        plan.objectives.f3_turns,
        plan.objectives.f4_smoothness,
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Plan {
            scenario,
            algo,
            seed,
            params,
            settings,
            out,
            trace,
        } => cmd_plan(
            &scenario,
            algo,
            seed,
            params.as_deref(),
            settings.as_deref(),
            out.as_deref(),
            trace.as_deref(),
        ),
        Command::GenMap {
            seed,
            width,
            height,
            resolution,
            density,
            out,
        } => {
            let map = generate_map(seed, width, height, resolution, density).map_err(input("gen-map"))?;
            write_file(&out, &save_map(&map))?;
            println!(
                "map {}x{} cells, {:.1} m x {:.1} m, {} blocked -> {}",
                map.width(),
                map.height(),
                map.width() as f64 * map.resolution(),
                map.height() as f64 * map.resolution(),
                map.blocked_count(),
                out.display()
            );
            Ok(())
        }
        Command::GenScenario {
            seed,
            map,
            tasks,
            window_lo,
            window_hi,
            speed,
            out,
        } => {
            let text = std::fs::read_to_string(&map).map_err(input("map"))?;
            let grid = load_map(&text).map_err(input("map"))?;
            let s = generate_scenario(seed, &grid, tasks as usize, window_lo, window_hi, speed)
                .map_err(input("gen-scenario"))?;
            write_file(&out, &save_scenario(&s))?;
            println!("scenario with {} tasks -> {}", s.tasks().len(), out.display());
            Ok(())
        }
        Command::Bench { config, out } => {
            let cfg: BenchConfig = read_json(&config)?;
            let suite = run_suite(&cfg, config.parent()).map_err(input("bench"))?;
            let files = write_outputs(&suite, &out).map_err(input("bench output"))?;
            for row in &suite.aggregates {
                println!(
                    "{:<13} runs={:<4} length_m={:.3} travel_s={:.3} compute_s={:.4} turns={:.2} smooth_rad={:.4} curv_std={:.4} completion_pct={:.1}",
                    row.method.name(),
                    row.runs,
                    row.length_m.mean,
                    row.travel_time_s.mean,
                    row.compute_time_s.mean,
                    row.turning_count.mean,
                    row.smoothness_rad.mean,
                    row.curvature_std.mean,
                    row.completion_pct.mean,
                );
            }
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Input(msg) | CliError::Internal(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.exit_code())
        }
    }
}
