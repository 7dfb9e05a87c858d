//! Property tests for geometric, scoring and colony invariants.

mod common;

use std::f64::consts::PI;

use colonyroute::aco::{allowed_set, heuristic, transition_probabilities};
use colonyroute::legs::{astar, build_leg_matrix};
use colonyroute::objectives::{
    path_length, scalar_objective, smoothness, turning_count, VisitStatus, DEFAULT_TURN_THRESHOLD,
};
use colonyroute::route::RouteState;
use colonyroute::world::{generate_map, generate_scenario, load_map, save_map};
use colonyroute::{
    Cell, EvalSettings, Evaluator, GridMap, LegMatrix, Norms, ObjectiveVector, Scenario, Task, WaitPolicy, Weights,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_map() -> impl Strategy<Value = GridMap> {
    (1usize..20, 1usize..20, prop::sample::select(vec![0.05, 0.1, 0.5, 1.0])).prop_flat_map(|(w, h, res)| {
        prop::collection::vec(prop::bool::weighted(0.25), w * h)
            .prop_map(move |occ| GridMap::from_occupancy(w, h, res, occ).expect("sizes match"))
    })
}

/// Random 8-connected walk with occasional waits, on an unbounded grid
/// offset away from zero.
fn arb_walk() -> impl Strategy<Value = Vec<Cell>> {
    prop::collection::vec(0usize..9, 0..60).prop_map(|moves| {
        let mut at = (100isize, 100isize);
        let mut out = vec![Cell::new(100, 100)];
        for m in moves {
            if m < 8 {
                let (dc, dr) = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)][m];
                at = (at.0 + dc, at.1 + dr);
            }
            out.push(Cell::new(at.0 as usize, at.1 as usize));
        }
        out
    })
}

fn arb_objectives() -> impl Strategy<Value = ObjectiveVector> {
    (0.0..100.0f64, 0.0..200.0f64, 0usize..50, 0.0..60.0f64).prop_map(|(l, t, k, s)| ObjectiveVector {
        f1_length: l,
        f2_makespan: t,
        f3_turns: k,
        f4_smoothness: s,
        curvature_std: 0.0,
    })
}

fn norms() -> Norms {
    Norms {
        length_m: 28.28,
        makespan_s: 28.28,
        turns: 20.0,
        smoothness_rad: PI,
    }
}

fn open_scenario(seed: u64, size: usize, n_tasks: usize) -> Scenario {
    let map = GridMap::new(size, size, 0.5).unwrap();
    generate_scenario(seed, &map, n_tasks, 0.0, 10.0, 1.0)
        .and_then(|s| s.with_windows(|_, _| (0.0, 1.0e9)))
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn neighbors_are_symmetric(map in arb_map()) {
        for c in map.free_cells() {
            for (n, len) in map.neighbors(c) {
                let back = map.neighbors(n);
                prop_assert!(back.iter().any(|&(m, l)| m == c && l == len), "{c:?} -> {n:?} not mirrored");
                prop_assert!(common::legal_step(&map, c, n));
            }
        }
    }

    #[test]
    fn map_text_round_trips(map in arb_map()) {
        let text = save_map(&map);
        let back = load_map(&text).unwrap();
        prop_assert_eq!(save_map(&back), text);
        prop_assert_eq!(back, map);
    }

    #[test]
    fn path_length_matches_naive_sum(walk in arb_walk(), res in 0.01..2.0f64) {
        let naive: f64 = walk
            .windows(2)
            .map(|w| {
                let dc = w[1].col as f64 - w[0].col as f64;
                let dr = w[1].row as f64 - w[0].row as f64;
                dc.hypot(dr) * res
            })
            .sum();
        prop_assert!((path_length(&walk, res) - naive).abs() <= 1e-9 * (1.0 + naive));
    }

    #[test]
    fn metrics_survive_quarter_turns_and_mirroring(walk in arb_walk()) {
        let rotated: Vec<Cell> = walk.iter().map(|c| Cell::new(c.row, 1000 - c.col)).collect();
        let mirrored: Vec<Cell> = walk.iter().map(|c| Cell::new(1000 - c.col, c.row)).collect();
        for other in [&rotated, &mirrored] {
            prop_assert_eq!(path_length(other, 0.1), path_length(&walk, 0.1));
            prop_assert_eq!(turning_count(other, DEFAULT_TURN_THRESHOLD), turning_count(&walk, DEFAULT_TURN_THRESHOLD));
            prop_assert!((smoothness(other) - smoothness(&walk)).abs() < 1e-9);
        }
    }

    #[test]
    fn turning_count_falls_as_threshold_rises(walk in arb_walk(), a in 0.0..PI, b in 0.0..PI) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(turning_count(&walk, hi) <= turning_count(&walk, lo));
    }

    #[test]
    fn scalar_objective_is_monotone_and_linear(
        v in arb_objectives(),
        extra in arb_objectives(),
        raw in prop::array::uniform4(0.01..1.0f64),
    ) {
        let total: f64 = raw.iter().sum();
        let w = Weights::new(raw[0] / total, raw[1] / total, raw[2] / total, 1.0 - (raw[0] + raw[1] + raw[2]) / total);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let worse = ObjectiveVector {
            f1_length: v.f1_length + extra.f1_length,
            f2_makespan: v.f2_makespan + extra.f2_makespan,
            f3_turns: v.f3_turns + extra.f3_turns,
            f4_smoothness: v.f4_smoothness + extra.f4_smoothness,
            curvature_std: 0.0,
        };
        let (fv, fe, fw) = (
            scalar_objective(&v, &w, &norms()).unwrap(),
            scalar_objective(&extra, &w, &norms()).unwrap(),
            scalar_objective(&worse, &w, &norms()).unwrap(),
        );
        prop_assert!(fv <= fw);
        prop_assert!((fv + fe - fw).abs() <= 1e-12 * (1.0 + fw));
    }

    #[test]
    fn heuristic_decreases_with_turns(length in 0.1..50.0f64, turns in 0usize..40, alpha in 0.01..5.0f64) {
        let leg = |t: usize| serde_json::json!({
            "from_node": 0, "to_node": 1, "cells": [[0, 0], [1, 0]],
            "length": length, "turns": t, "smooth": 0.0
        });
        let matrix = |t: usize| -> LegMatrix {
            serde_json::from_value(serde_json::json!({
                "n_nodes": 2, "legs": [null, leg(t), leg(t), null]
            }))
            .unwrap()
        };
        let (a, b) = (matrix(turns), matrix(turns + 1));
        prop_assert!(heuristic(&b, 0, 1, alpha) < heuristic(&a, 0, 1, alpha));
        prop_assert_eq!(heuristic(&a, 0, 1, 0.0), 1.0 / length);
    }

    #[test]
    fn probabilities_follow_ratio_rule(
        tau in prop::collection::vec(0.001..1000.0f64, 1..12),
        beta in 0.0..4.0f64,
        gamma in 0.0..4.0f64,
    ) {
        let eta: Vec<f64> = tau.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let p = transition_probabilities(&tau, &eta, beta, gamma).unwrap();
        let w: Vec<f64> = tau.iter().zip(&eta).map(|(t, e)| t.powf(beta) * e.powf(gamma)).collect();
        let total: f64 = w.iter().sum();
        for (pi, wi) in p.iter().zip(&w) {
            prop_assert!((pi - wi / total).abs() <= 1e-12);
        }
    }

    #[test]
    fn allowed_set_agrees_with_replay(seed in any::<u64>(), forbid in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = generate_map(rng.gen(), 16, 16, 0.25, 0.15).unwrap();
        let s = generate_scenario(rng.gen(), &map, rng.gen_range(2..=6), 0.0, 12.0, 1.0).unwrap();
        let wait = if forbid { WaitPolicy::Forbid } else { WaitPolicy::Allow };
        let settings = EvalSettings { wait_policy: wait, ..EvalSettings::default() };
        let legs = build_leg_matrix(&s, settings.turn_weight(&s), settings.turn_threshold).unwrap();
        let eval = Evaluator::new(&s, &legs, Weights::default(), settings).unwrap();

        // Walk a random feasible prefix, checking the set at every step.
        let mut state = RouteState::at_start(s.n_nodes());
        loop {
            let allowed = allowed_set(&state, &s, &legs, wait);
            let replayed: Vec<usize> = (1..s.n_nodes())
                .filter(|&j| !state.visited[j])
                .filter(|&j| {
                    let mut order = state.order.clone();
                    order.push(j);
                    let plan = eval.evaluate(&order);
                    let id = s.tasks()[j - 1].id;
                    plan.feasibility.tasks.iter().any(|t| t.task_id == id && t.status == VisitStatus::Met)
                })
                .collect();
            prop_assert_eq!(&allowed, &replayed);
            let Some(&next) = allowed.choose(&mut rng) else { break };
            state.advance(next, &s, &legs, wait);
        }
    }

    #[test]
    fn open_map_legs_are_metric(seed in any::<u64>()) {
        let s = open_scenario(seed, 12, 4);
        let legs = build_leg_matrix(&s, 0.0, DEFAULT_TURN_THRESHOLD).unwrap();
        let n = s.n_nodes();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                prop_assert_eq!(legs.get(i, j).length, legs.get(j, i).length);
                for k in 0..n {
                    if k != i && k != j {
                        let via = legs.get(i, k).length + legs.get(k, j).length;
                        prop_assert!(legs.get(i, j).length <= via + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn turn_weight_never_shortens_paths(seed in any::<u64>(), weight in 0.01..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = generate_map(rng.gen(), 20, 20, 0.1, 0.2).unwrap();
        let free: Vec<Cell> = map.largest_free_region();
        let (a, b) = (*free.choose(&mut rng).unwrap(), *free.choose(&mut rng).unwrap());
        let plain = astar(&map, a, b, 0.0, DEFAULT_TURN_THRESHOLD).unwrap();
        let weighted = astar(&map, a, b, weight, DEFAULT_TURN_THRESHOLD).unwrap();
        prop_assert!(path_length(&plain, 0.1) <= path_length(&weighted, 0.1));
        prop_assert!(common::check_connected(&map, a, &weighted).is_ok());
        prop_assert_eq!(weighted.last(), Some(&b));
    }
}

#[test]
fn greedy_is_never_shorter_than_the_best_tour() {
    use colonyroute::baselines::astar_greedy_plan;
    use itertools::Itertools;
    for seed in 0..40 {
        let s = open_scenario(seed, 14, 2 + (seed as usize % 5));
        let legs = build_leg_matrix(&s, 0.0, DEFAULT_TURN_THRESHOLD).unwrap();
        let eval = Evaluator::new(&s, &legs, Weights::default(), EvalSettings::default()).unwrap();
        let shortest = (1..s.n_nodes())
            .permutations(s.tasks().len())
            .map(|order| eval.evaluate(&order).objectives.f1_length)
            .fold(f64::INFINITY, f64::min);
        let greedy = astar_greedy_plan(&eval);
        assert!(greedy.complete);
        assert!(greedy.objectives.f1_length >= shortest, "seed {seed}");
    }
}

#[test]
fn ga_finds_the_exhaustive_optimum_on_small_instances() {
    use colonyroute::baselines::{exhaustive_plan, ga_plan};
    use colonyroute::GaParams;
    let mut hits = 0;
    for seed in 0..20 {
        let map = generate_map(seed, 15, 15, 0.1, 0.15).unwrap();
        let s = generate_scenario(seed, &map, 4, 5.0, 30.0, 1.0)
            .and_then(|s| s.with_windows(|_, _| (0.0, 1.0e6)))
            .unwrap();
        let settings = EvalSettings::default();
        let legs = build_leg_matrix(&s, settings.turn_weight(&s), settings.turn_threshold).unwrap();
        let eval = Evaluator::new(&s, &legs, Weights::default(), settings).unwrap();
        let best = exhaustive_plan(&eval).unwrap();
        let ga = ga_plan(
            &eval,
            &GaParams {
                population: 40,
                generations: 60,
                seed,
                ..GaParams::default()
            },
        )
        .unwrap();
        if (ga.best.f - best.f).abs() <= 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "GA matched the optimum on {hits}/20");
}

#[test]
fn first_choice_is_fair_on_a_symmetric_fixture() {
    use colonyroute::aco::{ant_rng, construct_solution, HeuristicTable};
    use colonyroute::{AcoParams, PheromoneMatrix};
    let task = |id, col| Task {
        id,
        cell: Cell::new(col, 2),
        window_start: 0.0,
        window_end: 100.0,
    };
    let s = Scenario::new(
        GridMap::new(5, 5, 1.0).unwrap(),
        Cell::new(2, 2),
        1.0,
        vec![task(1, 0), task(2, 4)],
    )
    .unwrap();
    let legs = build_leg_matrix(&s, 0.3, DEFAULT_TURN_THRESHOLD).unwrap();
    let eval = Evaluator::new(&s, &legs, Weights::default(), EvalSettings::default()).unwrap();
    let params = AcoParams::default();
    let tau = PheromoneMatrix::new(3, 1.0);
    let eta = HeuristicTable::new(&legs, params.alpha);
    assert_eq!(eta.get(0, 1), eta.get(0, 2));
    let runs = 10_000;
    let first_is_one = (0..runs)
        .filter(|&k| {
            let mut rng = ant_rng(99, 0, k);
            construct_solution(&eval, &tau, &eta, &params, &mut rng).visit_order[0] == 1
        })
        .count();
    let share = first_is_one as f64 / runs as f64;
    assert!((share - 0.5).abs() <= 0.02, "first choice share {share}");
}
