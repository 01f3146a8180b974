//! Gauss-Seidel value iteration, optionally with action elimination, and
//! topological value iteration.
//!
//! Topological value iteration decomposes the transition graph into
//! strongly connected components and runs value iteration on one component
//! at a time in increasing component id (most downstream first). Values of
//! already-solved components are read live from the shared value function;
//! they stay frozen because later components never back them up.

use std::time::Instant;

use crate::bounds::h_min;
use crate::graph::{build_graph, kosaraju_scc, proper_states, reachable_states};
use crate::mdp::{
    bellman_backup, q_value, residual, ActionMask, ActionRef, Mdp, SolveError, StateId, ValueFn,
};
use crate::stats::SolveStats;

/// Sweep interval for the structural divergence check. A swept state that
/// cannot reach a goal with probability one but holds a finite value will
/// grow forever (possibly by as little as its cheapest cost per sweep), so
/// waiting for the value cap alone could take ~1e12 sweeps.
const DIVERGENCE_CHECK_INTERVAL: u64 = 64;

/// Convergence threshold, divergence cap, and optional budget limits shared
/// by the value-iteration family.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Sweep until the largest residual over the swept set drops below this.
    pub delta: f64,
    /// A finite value growing past this cap signals a state that cannot
    /// reach a goal with probability one.
    pub value_cap: f64,
    pub max_sweeps: Option<u64>,
    /// Cooperative wall-clock cutoff, checked at sweep granularity.
    pub deadline: Option<Instant>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta: 1e-6,
            value_cap: 1e12,
            max_sweeps: None,
            deadline: None,
        }
    }
}

/// What one `value_iteration` call did.
#[derive(Clone, Copy, Debug)]
pub struct SweepOutcome {
    pub backups: u64,
    pub sweeps: u64,
    pub converged: bool,
}

/// Enables action elimination inside backups: an action whose Q-value under
/// the (lower-bound) iterate exceeds the frozen upper bound of its state can
/// never be optimal and is dropped from the mask.
pub struct EliminationCtx<'a> {
    pub upper: &'a ValueFn,
    pub mask: &'a mut ActionMask,
}

/// Backup of `s` over the surviving actions only, eliminating every action
/// whose Q-value exceeds the state's upper bound first.
fn eliminating_backup(
    mdp: &Mdp,
    values: &mut ValueFn,
    upper: &ValueFn,
    mask: &mut ActionMask,
    s: StateId,
) -> f64 {
    let cap = upper[s];
    let n_actions = mdp.actions(s).len() as u32;
    let mut best = f64::INFINITY;
    for slot in 0..n_actions {
        if !mask.survives(s, slot) {
            continue;
        }
        let q = q_value(mdp, values, ActionRef { state: s, slot });
        if q > cap {
            mask.eliminate(s, slot);
            continue;
        }
        if q < best {
            best = q;
        }
    }
    assert!(
        mask.surviving_count(s) > 0,
        "action elimination removed every action of state {s}; the value bounds are inconsistent"
    );
    let old = values[s];
    values.set(s, best);
    residual(old, best)
}

/// Gauss-Seidel sweeps over `subset` (in the given order, ascending ids by
/// convention) until the largest residual of a full sweep drops below
/// `cfg.delta`. The terminal confirming sweep counts toward the totals.
pub fn value_iteration(
    mdp: &Mdp,
    values: &mut ValueFn,
    subset: &[StateId],
    cfg: &SolverConfig,
    mut elim: Option<EliminationCtx<'_>>,
) -> Result<SweepOutcome, SolveError> {
    let mut backups = 0u64;
    let mut sweeps = 0u64;
    let mut proper: Option<Vec<bool>> = None;
    loop {
        if let Some(deadline) = cfg.deadline {
            if Instant::now() >= deadline {
                return Ok(SweepOutcome { backups, sweeps, converged: false });
            }
        }
        if let Some(max) = cfg.max_sweeps {
            if sweeps >= max {
                return Ok(SweepOutcome { backups, sweeps, converged: false });
            }
        }
        sweeps += 1;
        let mut worst = 0.0f64;
        for &s in subset {
            if mdp.is_goal(s) {
                continue;
            }
            let r = match elim.as_mut() {
                Some(ctx) => eliminating_backup(mdp, values, ctx.upper, ctx.mask, s),
                None => bellman_backup(mdp, values, s),
            };
            backups += 1;
            let v = values[s];
            if v.is_finite() && v > cfg.value_cap {
                return Err(SolveError::DivergentValue { state: s });
            }
            if r > worst {
                worst = r;
            }
        }
        if worst < cfg.delta {
            return Ok(SweepOutcome { backups, sweeps, converged: true });
        }
        if sweeps % DIVERGENCE_CHECK_INTERVAL == 0 {
            let proper = proper.get_or_insert_with(|| proper_states(mdp));
            for &s in subset {
                if !mdp.is_goal(s) && !proper[s.idx()] && values[s].is_finite() {
                    return Err(SolveError::DivergentValue { state: s });
                }
            }
        }
    }
}

/// Plain value iteration over the whole state space. Starts from zero when
/// no initial values are given.
pub fn solve_vi(
    mdp: &Mdp,
    cfg: &SolverConfig,
    initial: Option<ValueFn>,
) -> Result<(ValueFn, SolveStats), SolveError> {
    let start = Instant::now();
    let mut values = initial.unwrap_or_else(|| ValueFn::zeros(mdp.num_states()));
    let all: Vec<StateId> = mdp.states().collect();
    let out = value_iteration(mdp, &mut values, &all, cfg, None)?;
    let stats = SolveStats {
        backups: out.backups,
        iterations: out.sweeps,
        converged: out.converged,
        v_s0: values[mdp.initial()],
        wall_time: start.elapsed(),
        ..SolveStats::default()
    };
    Ok((values, stats))
}

/// Value iteration with action elimination. `initial` must be admissible
/// (defaults to the relaxation bound) so the iterate stays a lower bound and
/// the `Q > upper` test is sound; `upper` stays frozen for the whole run.
pub fn solve_vi_elim(
    mdp: &Mdp,
    cfg: &SolverConfig,
    initial: Option<ValueFn>,
    upper: &ValueFn,
) -> Result<(ValueFn, ActionMask, SolveStats), SolveError> {
    let start = Instant::now();
    let mut values = initial.unwrap_or_else(|| h_min(mdp));
    let mut mask = ActionMask::all_surviving(mdp);
    let all: Vec<StateId> = mdp.states().collect();
    let out = value_iteration(
        mdp,
        &mut values,
        &all,
        cfg,
        Some(EliminationCtx { upper, mask: &mut mask }),
    )?;
    let stats = SolveStats {
        backups: out.backups,
        iterations: out.sweeps,
        eliminated_actions: mask.eliminated_count(),
        converged: out.converged,
        v_s0: values[mdp.initial()],
        wall_time: start.elapsed(),
        ..SolveStats::default()
    };
    Ok((values, mask, stats))
}

/// Topological value iteration. Decomposes the transition graph (restricted
/// to the states reachable from the initial state when `use_reachability` is
/// set), then solves components in increasing id order so everything a
/// component depends on is already converged. `initial` defaults to the
/// relaxation lower bound.
pub fn tvi(
    mdp: &Mdp,
    cfg: &SolverConfig,
    use_reachability: bool,
    initial: Option<ValueFn>,
) -> Result<(ValueFn, SolveStats), SolveError> {
    let start = Instant::now();
    let mut values = initial.unwrap_or_else(|| h_min(mdp));
    let restrict = if use_reachability {
        Some(reachable_states(mdp, mdp.initial(), |_, _| true))
    } else {
        None
    };
    let graph = build_graph(mdp, |_, _| true, restrict.as_ref());
    let scc = kosaraju_scc(&graph);

    let mut stats = SolveStats {
        scc_count: scc.component_count(),
        max_scc: scc.max_component_size(),
        converged: true,
        ..SolveStats::default()
    };
    for cid in 1..=scc.component_count() as u32 {
        let members = scc.members(cid);
        if members.iter().all(|&s| mdp.is_goal(s)) {
            continue;
        }
        let out = value_iteration(mdp, &mut values, members, cfg, None)?;
        stats.backups += out.backups;
        stats.iterations += out.sweeps;
        if !out.converged {
            stats.converged = false;
            break;
        }
    }
    stats.v_s0 = values[mdp.initial()];
    stats.wall_time = start.elapsed();
    Ok((values, stats))
}
