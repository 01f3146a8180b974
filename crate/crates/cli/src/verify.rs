//! Oracle verification of one instance: cross-solver agreement, bound
//! sandwiching, elimination soundness, and decomposition dominance.

use topomdp::bounds::{h_min, init_upper_bound};
use topomdp::ftvi::{build_pruned_graph, ftvi, FtviConfig};
use topomdp::graph::{build_graph, kosaraju_scc};
use topomdp::mdp::{Mdp, SolveError, StateId, ValueFn};

use crate::runner::{oracle_values, run_solver, Algo, SolveOptions};

const AGREEMENT_TOL: f64 = 1e-4;
const BOUND_TOL: f64 = 1e-9;

pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckLine {
    fn ok(name: impl Into<String>) -> Self {
        CheckLine {
            name: name.into(),
            pass: true,
            detail: String::new(),
        }
    }

    fn fail(name: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckLine {
            name: name.into(),
            pass: false,
            detail: detail.into(),
        }
    }
}

fn q_under(mdp: &Mdp, v: &ValueFn, s: StateId, slot: usize) -> f64 {
    let act = &mdp.actions(s)[slot];
    let mut q = act.cost;
    for &(t, p) in &act.transitions {
        q += p * v[t];
    }
    q
}

/// Runs every check against the high-precision oracle. Propagates
/// `DivergentValue` when the instance itself is improper from its initial
/// state — there is nothing to verify then.
pub fn verify_instance(mdp: &Mdp, seed: u64) -> Result<Vec<CheckLine>, SolveError> {
    let oracle = oracle_values(mdp, 1e12)?;
    let mut checks = Vec::new();

    let lower = h_min(mdp);
    match mdp
        .states()
        .find(|&s| lower[s] > oracle[s] + BOUND_TOL)
    {
        None => checks.push(CheckLine::ok("lower-bound-admissible")),
        Some(s) => checks.push(CheckLine::fail(
            "lower-bound-admissible",
            format!("state {s}: h = {} exceeds V* = {}", lower[s], oracle[s]),
        )),
    }

    let upper = init_upper_bound(mdp, 3);
    match mdp
        .states()
        .find(|&s| upper[s] < oracle[s] - BOUND_TOL)
    {
        None => checks.push(CheckLine::ok("upper-bound-valid")),
        Some(s) => checks.push(CheckLine::fail(
            "upper-bound-valid",
            format!("state {s}: V_u = {} below V* = {}", upper[s], oracle[s]),
        )),
    }

    let target = oracle[mdp.initial()];
    for algo in Algo::ALL {
        let name = format!("agreement-{}", algo.name());
        let opts = SolveOptions {
            algo,
            seed,
            ..SolveOptions::default()
        };
        match crate::runner::build_heuristic(mdp, &opts) {
            Ok(initial) => match run_solver(mdp, &opts, initial) {
                Ok(stats) if (stats.v_s0 - target).abs() <= AGREEMENT_TOL => {
                    checks.push(CheckLine::ok(name));
                }
                Ok(stats) => checks.push(CheckLine::fail(
                    name,
                    format!("v(s0) = {} but oracle says {}", stats.v_s0, target),
                )),
                Err(e) => checks.push(CheckLine::fail(name, e.to_string())),
            },
            Err(e) => checks.push(CheckLine::fail(name, e.to_string())),
        }
    }

    match ftvi(mdp, &FtviConfig::default()) {
        Ok(out) => {
            let mut bad_elimination = None;
            let mut missing_optimal = None;
            for s in mdp.states() {
                if mdp.is_goal(s) {
                    continue;
                }
                let v_star = oracle[s];
                let mut optimal_survives = false;
                for slot in 0..mdp.actions(s).len() {
                    let q = q_under(mdp, &oracle, s, slot);
                    if out.mask.survives(s, slot as u32) {
                        if q <= v_star + BOUND_TOL {
                            optimal_survives = true;
                        }
                    } else if q <= v_star - BOUND_TOL {
                        bad_elimination.get_or_insert((s, slot, q, v_star));
                    }
                }
                if !optimal_survives {
                    missing_optimal.get_or_insert(s);
                }
            }
            match bad_elimination {
                None => checks.push(CheckLine::ok("elimination-sound")),
                Some((s, slot, q, v)) => checks.push(CheckLine::fail(
                    "elimination-sound",
                    format!("eliminated action ({s}, {slot}) has Q* = {q} <= V* = {v}"),
                )),
            }
            match missing_optimal {
                None => checks.push(CheckLine::ok("optimal-action-survives")),
                Some(s) => checks.push(CheckLine::fail(
                    "optimal-action-survives",
                    format!("state {s} kept no optimal action"),
                )),
            }

            let full = kosaraju_scc(&build_graph(mdp, |_, _| true, None));
            let pruned = kosaraju_scc(&build_pruned_graph(mdp, &out.mask));
            if pruned.max_component_size() <= full.max_component_size() {
                checks.push(CheckLine::ok("pruned-components-within-full"));
            } else {
                checks.push(CheckLine::fail(
                    "pruned-components-within-full",
                    format!(
                        "pruned max component {} exceeds full {}",
                        pruned.max_component_size(),
                        full.max_component_size()
                    ),
                ));
            }

            match mdp
                .states()
                .find(|&s| out.bounds.lower[s] > oracle[s] + BOUND_TOL)
            {
                None => checks.push(CheckLine::ok("final-sandwich")),
                Some(s) => checks.push(CheckLine::fail(
                    "final-sandwich",
                    format!(
                        "state {s}: final lower bound {} exceeds V* = {}",
                        out.bounds.lower[s], oracle[s]
                    ),
                )),
            }
        }
        Err(e) => checks.push(CheckLine::fail("elimination-sound", e.to_string())),
    }

    Ok(checks)
}
