//! Focused topological value iteration.
//!
//! Runs in two steps. The search step performs batches of depth-first
//! greedy searches from the initial state, backing each visited state up at
//! most once per iteration. Every backup updates both value bounds and
//! eliminates actions whose lower-bound Q-value exceeds the state's upper
//! bound — such an action can never be optimal. If the searched region's
//! Bellman error drops below the threshold the problem is already solved and
//! the second step is skipped. Otherwise the computation step rebuilds the
//! transition graph from the surviving actions only (a subgraph of the full
//! one, so its strongly connected components can only shrink) and runs the
//! topological solve with elimination-enabled backups.

use std::time::Instant;

use crate::bounds::{h_min, init_upper_bound};
use crate::graph::{build_graph, kosaraju_scc, reachable_states, StateGraph};
use crate::mdp::{
    extract_policy, q_value, residual, ActionMask, ActionRef, Mdp, Policy, SolveError, StateId,
    StateSet, ValueBounds, ValueFn,
};
use crate::stats::SolveStats;
use crate::vi::{value_iteration, EliminationCtx, SolverConfig};

/// Search batching and convergence parameters.
#[derive(Clone, Debug)]
pub struct FtviConfig {
    /// Search iterations per batch.
    pub search_batch: u64,
    /// Stop batching when the initial state's lower bound improved by less
    /// than this percentage over the last batch.
    pub min_improvement_pct: f64,
    pub delta: f64,
    pub value_cap: f64,
    /// Backward tightening passes for the initial upper bound.
    pub upper_passes: usize,
    /// Run extra searches inside large components before solving them.
    pub intra_component: bool,
    pub deadline: Option<Instant>,
}

impl Default for FtviConfig {
    fn default() -> Self {
        FtviConfig {
            search_batch: 100,
            min_improvement_pct: 3.0,
            delta: 1e-6,
            value_cap: 1e12,
            upper_passes: 3,
            intra_component: false,
            deadline: None,
        }
    }
}

/// How the search step ended.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    /// The searched region converged; the computation step is unnecessary.
    Converged,
    /// Batching stopped paying off; hand over to the computation step.
    ProceedToComputation,
    /// The deadline expired mid-search.
    TimedOut,
}

/// Everything an FTVI run produces. `bounds.lower` carries the value
/// function; the mask records which actions were proven suboptimal.
#[derive(Clone, Debug)]
pub struct FtviOutcome {
    pub bounds: ValueBounds,
    pub policy: Policy,
    pub mask: ActionMask,
    pub stats: SolveStats,
}

/// Callback invoked with the bounds and mask after initialization and after
/// every completed search batch.
pub type BatchObserver<'a> = &'a mut dyn FnMut(&ValueBounds, &ActionMask);

/// Dual-bound backup of one non-goal state. Eliminates every surviving
/// action whose lower-bound Q-value exceeds the state's current upper bound,
/// then sets both bounds to their minima over the remaining actions.
/// Returns the lower-bound residual.
pub fn dual_backup(mdp: &Mdp, bounds: &mut ValueBounds, mask: &mut ActionMask, s: StateId) -> f64 {
    debug_assert!(!mdp.is_goal(s));
    let cap = bounds.upper[s];
    let n_actions = mdp.actions(s).len() as u32;
    let mut best_lower = f64::INFINITY;
    for slot in 0..n_actions {
        if !mask.survives(s, slot) {
            continue;
        }
        let q = q_value(mdp, &bounds.lower, ActionRef { state: s, slot });
        if q > cap {
            mask.eliminate(s, slot);
            continue;
        }
        if q < best_lower {
            best_lower = q;
        }
    }
    assert!(
        mask.surviving_count(s) > 0,
        "action elimination removed every action of state {s}; the value bounds are inconsistent"
    );
    let mut best_upper = f64::INFINITY;
    for slot in 0..n_actions {
        if !mask.survives(s, slot) {
            continue;
        }
        let q = q_value(mdp, &bounds.upper, ActionRef { state: s, slot });
        if q < best_upper {
            best_upper = q;
        }
    }
    let old = bounds.lower[s];
    bounds.lower.set(s, best_lower);
    bounds.upper.set(s, best_upper);
    debug_assert!(best_lower <= best_upper + 1e-9);
    residual(old, best_lower)
}

/// Greedy action under the lower bound, restricted to surviving actions.
fn greedy_surviving(mdp: &Mdp, lower: &ValueFn, mask: &ActionMask, s: StateId) -> ActionRef {
    let n_actions = mdp.actions(s).len() as u32;
    let mut best: Option<(f64, ActionRef)> = None;
    for slot in 0..n_actions {
        if !mask.survives(s, slot) {
            continue;
        }
        let a = ActionRef { state: s, slot };
        let q = q_value(mdp, lower, a);
        match best {
            Some((bq, _)) if bq <= q => {}
            _ => best = Some((q, a)),
        }
    }
    best.expect("no surviving action").1
}

/// One depth-first search from the initial state: follow the greedy action
/// of each newly visited state, then back states up in post-order on the way
/// back. Uses an explicit stack so deep instances cannot overflow the call
/// stack. Returns the largest lower-bound residual among the states backed
/// up in this iteration.
fn search_iteration(
    mdp: &Mdp,
    bounds: &mut ValueBounds,
    mask: &mut ActionMask,
    visited: &mut [bool],
    stats: &mut SolveStats,
) -> f64 {
    let mut worst = 0.0f64;
    let mut stack: Vec<(StateId, bool)> = vec![(mdp.initial(), false)];
    while let Some((s, backup)) = stack.pop() {
        if backup {
            let r = dual_backup(mdp, bounds, mask, s);
            stats.backups += 1;
            if r > worst {
                worst = r;
            }
            continue;
        }
        if visited[s.idx()] {
            continue;
        }
        visited[s.idx()] = true;
        if mdp.is_goal(s) {
            continue;
        }
        let a = greedy_surviving(mdp, &bounds.lower, mask, s);
        stack.push((s, true));
        let transitions = &mdp.action(a).transitions;
        for &(succ, _) in transitions.iter().rev() {
            if !visited[succ.idx()] {
                stack.push((succ, false));
            }
        }
    }
    worst
}

/// The search step: batches of greedy searches with dual-bound backups.
/// Ends with `Converged` as soon as one iteration's Bellman error over the
/// backed-up states drops below `delta`, or with `ProceedToComputation` when
/// a whole batch improved the initial state's lower bound by less than the
/// configured percentage.
pub fn search_phase(
    mdp: &Mdp,
    bounds: &mut ValueBounds,
    mask: &mut ActionMask,
    cfg: &FtviConfig,
    stats: &mut SolveStats,
    mut on_batch: Option<BatchObserver<'_>>,
) -> SearchOutcome {
    let s0 = mdp.initial();
    let mut visited = vec![false; mdp.num_states()];
    loop {
        let before = bounds.lower[s0];
        for _ in 0..cfg.search_batch {
            if let Some(deadline) = cfg.deadline {
                if Instant::now() >= deadline {
                    return SearchOutcome::TimedOut;
                }
            }
            stats.iterations += 1;
            visited.fill(false);
            let err = search_iteration(mdp, bounds, mask, &mut visited, stats);
            if err < cfg.delta {
                if let Some(cb) = on_batch.as_mut() {
                    cb(bounds, mask);
                }
                return SearchOutcome::Converged;
            }
        }
        if let Some(cb) = on_batch.as_mut() {
            cb(bounds, mask);
        }
        let after = bounds.lower[s0];
        if !after.is_finite() {
            // searching cannot improve an infinite start; let the
            // computation step classify the instance
            return SearchOutcome::ProceedToComputation;
        }
        // relative-improvement guard; a zero/zero start keeps batching
        if after > 0.0 && before / after > (100.0 - cfg.min_improvement_pct) / 100.0 {
            return SearchOutcome::ProceedToComputation;
        }
    }
}

/// The surviving-action graph, restricted to the states reachable from the
/// initial state through surviving actions. Always a subgraph of the full
/// reachability graph.
pub fn build_pruned_graph(mdp: &Mdp, mask: &ActionMask) -> StateGraph {
    let restrict = reachable_states(mdp, mdp.initial(), |s, slot| mask.survives(s, slot));
    build_graph(mdp, |s, slot| mask.survives(s, slot), Some(&restrict))
}

/// Extra greedy searches confined to one component, rooted at its entry
/// states (members with an incoming surviving edge from outside the
/// component, plus the initial state if it lies inside). Search branches
/// stop at the component boundary; states outside are neither expanded nor
/// backed up. May eliminate further actions and thereby split the component.
pub fn intra_component_search(
    mdp: &Mdp,
    bounds: &mut ValueBounds,
    mask: &mut ActionMask,
    component: &[StateId],
    stats: &mut SolveStats,
) {
    let n = mdp.num_states();
    let mut in_component = vec![false; n];
    for &s in component {
        in_component[s.idx()] = true;
    }

    let mut is_root = vec![false; n];
    for s in mdp.states() {
        if in_component[s.idx()] {
            continue;
        }
        for (slot, act) in mdp.actions(s).iter().enumerate() {
            if !mask.survives(s, slot as u32) {
                continue;
            }
            for &(t, _) in &act.transitions {
                if in_component[t.idx()] {
                    is_root[t.idx()] = true;
                }
            }
        }
    }
    if in_component[mdp.initial().idx()] {
        is_root[mdp.initial().idx()] = true;
    }
    let roots: Vec<StateId> = component.iter().copied().filter(|s| is_root[s.idx()]).collect();

    let mut visited = vec![false; n];
    for &root in &roots {
        visited.fill(false);
        let mut stack: Vec<(StateId, bool)> = vec![(root, false)];
        while let Some((s, backup)) = stack.pop() {
            if backup {
                stats.backups += 1;
                dual_backup(mdp, bounds, mask, s);
                continue;
            }
            if visited[s.idx()] || !in_component[s.idx()] {
                continue;
            }
            visited[s.idx()] = true;
            if mdp.is_goal(s) {
                continue;
            }
            let a = greedy_surviving(mdp, &bounds.lower, mask, s);
            stack.push((s, true));
            for &(succ, _) in mdp.action(a).transitions.iter().rev() {
                if !visited[succ.idx()] && in_component[succ.idx()] {
                    stack.push((succ, false));
                }
            }
        }
    }
}

/// Focused topological value iteration with default bounds (relaxation
/// lower bound, backward-tightened upper bound).
pub fn ftvi(mdp: &Mdp, cfg: &FtviConfig) -> Result<FtviOutcome, SolveError> {
    ftvi_with(mdp, cfg, None, None)
}

/// FTVI with an optional admissible lower bound replacing the default and an
/// optional observer for the bounds after initialization and each search
/// batch.
pub fn ftvi_with(
    mdp: &Mdp,
    cfg: &FtviConfig,
    initial_lower: Option<ValueFn>,
    mut on_batch: Option<BatchObserver<'_>>,
) -> Result<FtviOutcome, SolveError> {
    assert!(cfg.search_batch >= 1, "search batch must be at least 1");
    assert!(
        cfg.min_improvement_pct > 0.0 && cfg.min_improvement_pct < 100.0,
        "improvement cutoff must lie in (0, 100)"
    );
    let start = Instant::now();
    let lower = initial_lower.unwrap_or_else(|| h_min(mdp));
    let upper = init_upper_bound(mdp, cfg.upper_passes);
    let mut bounds = ValueBounds::new(lower, upper);
    let mut mask = ActionMask::all_surviving(mdp);
    let mut stats = SolveStats::default();

    if let Some(cb) = on_batch.as_mut() {
        cb(&bounds, &mask);
    }
    let outcome = search_phase(mdp, &mut bounds, &mut mask, cfg, &mut stats, on_batch);

    match outcome {
        SearchOutcome::Converged => {
            stats.converged = true;
        }
        SearchOutcome::TimedOut => {
            stats.converged = false;
        }
        SearchOutcome::ProceedToComputation => {
            let pruned = build_pruned_graph(mdp, &mask);
            let scc = kosaraju_scc(&pruned);
            stats.scc_count = scc.component_count();
            stats.max_scc = scc.max_component_size();
            let vi_cfg = SolverConfig {
                delta: cfg.delta,
                value_cap: cfg.value_cap,
                max_sweeps: None,
                deadline: cfg.deadline,
            };
            stats.converged = true;
            for cid in 1..=scc.component_count() as u32 {
                let members = scc.members(cid);
                if members.iter().all(|&s| mdp.is_goal(s)) {
                    continue;
                }
                if cfg.intra_component && members.len() > 1 {
                    intra_component_search(mdp, &mut bounds, &mut mask, members, &mut stats);
                    // the extra eliminations may have split this component
                    let member_set = StateSet::from_members(mdp.num_states(), members.to_vec());
                    let sub = kosaraju_scc(&build_graph(
                        mdp,
                        |s, slot| mask.survives(s, slot),
                        Some(&member_set),
                    ));
                    for sub_cid in 1..=sub.component_count() as u32 {
                        let sub_members = sub.members(sub_cid);
                        if !solve_component(mdp, &mut bounds, &mut mask, sub_members, &vi_cfg, &mut stats)? {
                            stats.converged = false;
                            break;
                        }
                    }
                } else if !solve_component(mdp, &mut bounds, &mut mask, members, &vi_cfg, &mut stats)? {
                    stats.converged = false;
                }
                if !stats.converged {
                    break;
                }
            }
        }
    }

    stats.eliminated_actions = mask.eliminated_count();
    stats.v_s0 = bounds.lower[mdp.initial()];
    let policy = if stats.converged {
        extract_policy(mdp, &bounds.lower)?
    } else {
        Policy::undefined(mdp.num_states())
    };
    stats.wall_time = start.elapsed();
    Ok(FtviOutcome {
        bounds,
        policy,
        mask,
        stats,
    })
}

/// Elimination-enabled value iteration over one component; the upper bound
/// stays frozen and only feeds the elimination test. Returns whether the
/// component converged.
fn solve_component(
    mdp: &Mdp,
    bounds: &mut ValueBounds,
    mask: &mut ActionMask,
    members: &[StateId],
    cfg: &SolverConfig,
    stats: &mut SolveStats,
) -> Result<bool, SolveError> {
    let ValueBounds { lower, upper } = bounds;
    let out = value_iteration(
        mdp,
        lower,
        members,
        cfg,
        Some(EliminationCtx {
            upper: &*upper,
            mask,
        }),
    )?;
    stats.backups += out.backups;
    Ok(out.converged)
}
