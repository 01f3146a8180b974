//! Heuristic-search comparison solvers: ILAO*, labeled RTDP, and bounded
//! RTDP. All three require an admissible initial lower bound.

use std::time::Instant;

use crate::graph::proper_states;
use crate::mdp::{
    bellman_backup, q_value, residual, ActionRef, Mdp, SolveError, StateId, ValueBounds, ValueFn,
};
use crate::rng::SplitMix64;
use crate::stats::SolveStats;

/// Iteration interval of the structural divergence check: a start state
/// that cannot reach a goal with probability one can keep trials and
/// searches busy indefinitely while its value creeps upward.
const DIVERGENCE_CHECK_INTERVAL: u64 = 64;

fn start_is_improper(mdp: &Mdp, cache: &mut Option<Vec<bool>>) -> bool {
    let proper = cache.get_or_insert_with(|| proper_states(mdp));
    !proper[mdp.initial().idx()]
}

/// Parameters shared by the trial-based solvers. `alpha` is the bound gap at
/// which bounded RTDP declares the initial state converged and `tau` scales
/// its adaptive trial cutoff. `max_trial_len` defaults to ten times the
/// state count and guards against dead-end wandering.
#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub delta: f64,
    pub alpha: f64,
    pub tau: f64,
    pub max_trial_len: Option<usize>,
    pub rng_seed: u64,
    pub value_cap: f64,
    pub deadline: Option<Instant>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            delta: 1e-6,
            alpha: 2e-6,
            tau: 10.0,
            max_trial_len: None,
            rng_seed: 0,
            value_cap: 1e12,
            deadline: None,
        }
    }
}

impl TrialConfig {
    fn trial_cutoff(&self, mdp: &Mdp) -> usize {
        self.max_trial_len.unwrap_or(10 * mdp.num_states())
    }
}

/// Backup that also reports the greedy slot (argmin, lowest slot on ties).
fn backup_with_greedy(mdp: &Mdp, values: &mut ValueFn, s: StateId) -> (u32, f64) {
    let n_actions = mdp.actions(s).len() as u32;
    let mut best_q = f64::INFINITY;
    let mut best_slot = 0u32;
    for slot in 0..n_actions {
        let q = q_value(mdp, values, ActionRef { state: s, slot });
        if q < best_q {
            best_q = q;
            best_slot = slot;
        }
    }
    let old = values[s];
    values.set(s, best_q);
    (best_slot, residual(old, best_q))
}

fn check_cap(values: &ValueFn, s: StateId, cap: f64) -> Result<(), SolveError> {
    let v = values[s];
    if v.is_finite() && v > cap {
        return Err(SolveError::DivergentValue { state: s });
    }
    Ok(())
}

/// Cumulative-probability inversion over one action's outcome list.
fn sample_successor(mdp: &Mdp, a: ActionRef, rng: &mut SplitMix64) -> StateId {
    let transitions = &mdp.action(a).transitions;
    let r = rng.next_f64();
    let mut cum = 0.0;
    for &(succ, p) in transitions {
        cum += p;
        if r < cum {
            return succ;
        }
    }
    transitions.last().expect("action without outcomes").0
}

/// Improved LAO*: repeatedly traverse the current greedy policy graph from
/// the initial state depth-first, backing each visited state up once in
/// post-order. Terminates when a traversal neither expands a new state nor
/// produces a residual at or above the threshold.
pub fn ilao_star(
    mdp: &Mdp,
    mut values: ValueFn,
    cfg: &TrialConfig,
) -> Result<(ValueFn, SolveStats), SolveError> {
    let start = Instant::now();
    let n = mdp.num_states();
    let s0 = mdp.initial();
    let mut stats = SolveStats::default();
    let mut visited = vec![false; n];
    let mut seen = vec![false; n];
    let mut stack: Vec<(StateId, bool)> = Vec::new();
    let mut proper_cache: Option<Vec<bool>> = None;

    loop {
        if let Some(deadline) = cfg.deadline {
            if Instant::now() >= deadline {
                break;
            }
        }
        if stats.iterations % DIVERGENCE_CHECK_INTERVAL == DIVERGENCE_CHECK_INTERVAL - 1
            && start_is_improper(mdp, &mut proper_cache)
        {
            return Err(SolveError::DivergentValue { state: s0 });
        }
        stats.iterations += 1;
        visited.fill(false);
        let mut newly_expanded = 0u64;
        let mut err = 0.0f64;
        stack.push((s0, false));
        while let Some((s, backup)) = stack.pop() {
            if backup {
                let r = bellman_backup(mdp, &mut values, s);
                stats.backups += 1;
                check_cap(&values, s, cfg.value_cap)?;
                if r > err {
                    err = r;
                }
                continue;
            }
            if visited[s.idx()] {
                continue;
            }
            visited[s.idx()] = true;
            if !seen[s.idx()] {
                seen[s.idx()] = true;
                newly_expanded += 1;
            }
            if mdp.is_goal(s) {
                continue;
            }
            let a = crate::mdp::greedy_action(mdp, &values, s);
            stack.push((s, true));
            for &(succ, _) in mdp.action(a).transitions.iter().rev() {
                if !visited[succ.idx()] {
                    stack.push((succ, false));
                }
            }
        }
        if err < cfg.delta && newly_expanded == 0 {
            stats.converged = true;
            break;
        }
    }
    stats.v_s0 = values[s0];
    stats.wall_time = start.elapsed();
    Ok((values, stats))
}

/// Labeled RTDP: greedy trials from the initial state with backups on
/// visit, then a labeling pass that marks states solved once everything
/// greedy-reachable from them is a goal, already solved, or within the
/// residual threshold. Solved states are never backed up again; the run
/// ends when the initial state is labeled.
pub fn lrtdp(
    mdp: &Mdp,
    values: ValueFn,
    cfg: &TrialConfig,
) -> Result<(ValueFn, SolveStats), SolveError> {
    let (values, _, stats) = lrtdp_labeled(mdp, values, cfg)?;
    Ok((values, stats))
}

/// [`lrtdp`] that also returns the final solved labels (goals are labeled
/// from the start; labels never revert).
pub fn lrtdp_labeled(
    mdp: &Mdp,
    mut values: ValueFn,
    cfg: &TrialConfig,
) -> Result<(ValueFn, Vec<bool>, SolveStats), SolveError> {
    let start = Instant::now();
    let n = mdp.num_states();
    let s0 = mdp.initial();
    let cutoff = cfg.trial_cutoff(mdp);
    let mut rng = SplitMix64::new(cfg.rng_seed);
    let mut stats = SolveStats::default();

    let mut solved: Vec<bool> = mdp.states().map(|s| mdp.is_goal(s)).collect();
    let mut marked = vec![0u64; n];
    let mut epoch = 0u64;
    let mut path: Vec<StateId> = Vec::new();
    let mut proper_cache: Option<Vec<bool>> = None;

    while !solved[s0.idx()] {
        if let Some(deadline) = cfg.deadline {
            if Instant::now() >= deadline {
                break;
            }
        }
        if stats.iterations % DIVERGENCE_CHECK_INTERVAL == DIVERGENCE_CHECK_INTERVAL - 1
            && start_is_improper(mdp, &mut proper_cache)
        {
            return Err(SolveError::DivergentValue { state: s0 });
        }
        stats.iterations += 1;
        path.clear();
        let mut s = s0;
        while !solved[s.idx()] && path.len() < cutoff {
            path.push(s);
            let (slot, _) = backup_with_greedy(mdp, &mut values, s);
            stats.backups += 1;
            check_cap(&values, s, cfg.value_cap)?;
            s = sample_successor(mdp, ActionRef { state: s, slot }, &mut rng);
        }
        while let Some(top) = path.pop() {
            epoch += 1;
            if !check_solved(
                mdp,
                &mut values,
                &mut solved,
                top,
                cfg,
                &mut stats,
                &mut marked,
                epoch,
            )? {
                break;
            }
        }
    }
    stats.converged = solved[s0.idx()];
    stats.v_s0 = values[s0];
    stats.wall_time = start.elapsed();
    Ok((values, solved, stats))
}

/// The labeling test: depth-first over the greedy graph rooted at `root`,
/// refusing to expand below any state whose residual exceeds the threshold.
/// Labels everything visited on success; re-backs visited states up in
/// reverse order on failure.
#[allow(clippy::too_many_arguments)]
fn check_solved(
    mdp: &Mdp,
    values: &mut ValueFn,
    solved: &mut [bool],
    root: StateId,
    cfg: &TrialConfig,
    stats: &mut SolveStats,
    marked: &mut [u64],
    epoch: u64,
) -> Result<bool, SolveError> {
    if solved[root.idx()] {
        return Ok(true);
    }
    let mut all_within = true;
    let mut open = vec![root];
    let mut closed: Vec<StateId> = Vec::new();
    marked[root.idx()] = epoch;
    while let Some(s) = open.pop() {
        closed.push(s);
        let n_actions = mdp.actions(s).len() as u32;
        let mut best_q = f64::INFINITY;
        let mut best_slot = 0u32;
        for slot in 0..n_actions {
            let q = q_value(mdp, values, ActionRef { state: s, slot });
            if q < best_q {
                best_q = q;
                best_slot = slot;
            }
        }
        if residual(values[s], best_q) > cfg.delta {
            all_within = false;
            continue;
        }
        let a = ActionRef { state: s, slot: best_slot };
        for &(succ, _) in &mdp.action(a).transitions {
            if !mdp.is_goal(succ) && !solved[succ.idx()] && marked[succ.idx()] != epoch {
                marked[succ.idx()] = epoch;
                open.push(succ);
            }
        }
    }
    if all_within {
        for &s in &closed {
            solved[s.idx()] = true;
        }
    } else {
        while let Some(s) = closed.pop() {
            bellman_backup(mdp, values, s);
            stats.backups += 1;
            check_cap(values, s, cfg.value_cap)?;
        }
    }
    Ok(all_within)
}

/// Both-bound backup; returns the greedy slot under the lower bound.
fn backup_both(
    mdp: &Mdp,
    bounds: &mut ValueBounds,
    s: StateId,
    cap: f64,
) -> Result<u32, SolveError> {
    let n_actions = mdp.actions(s).len() as u32;
    let mut best_l = f64::INFINITY;
    let mut best_slot = 0u32;
    for slot in 0..n_actions {
        let q = q_value(mdp, &bounds.lower, ActionRef { state: s, slot });
        if q < best_l {
            best_l = q;
            best_slot = slot;
        }
    }
    let mut best_u = f64::INFINITY;
    for slot in 0..n_actions {
        let q = q_value(mdp, &bounds.upper, ActionRef { state: s, slot });
        if q < best_u {
            best_u = q;
        }
    }
    bounds.lower.set(s, best_l);
    bounds.upper.set(s, best_u);
    if best_l.is_finite() && best_l > cap {
        return Err(SolveError::DivergentValue { state: s });
    }
    if best_u.is_infinite() {
        // the upper bound stays infinite only where no goal is reachable
        // with probability 1; trials cannot converge through such a state
        return Err(SolveError::DivergentValue { state: s });
    }
    Ok(best_slot)
}

/// Bounded RTDP: trials from the initial state that back up both bounds at
/// every step, pick the greedy action under the lower bound, and sample the
/// next state in proportion to transition probability times bound gap. A
/// trial ends when that gap mass falls below the initial state's gap scaled
/// by `tau`; the walk is then backed up again in reverse. Terminates when
/// the initial state's gap drops below `alpha`.
pub fn brtdp(
    mdp: &Mdp,
    mut bounds: ValueBounds,
    cfg: &TrialConfig,
) -> Result<(ValueBounds, SolveStats), SolveError> {
    let start = Instant::now();
    let s0 = mdp.initial();
    let cutoff = cfg.trial_cutoff(mdp);
    let mut rng = SplitMix64::new(cfg.rng_seed);
    let mut stats = SolveStats::default();
    let mut path: Vec<StateId> = Vec::new();

    loop {
        if !bounds.lower[s0].is_finite() {
            // an infinite admissible lower bound marks the start improper
            return Err(SolveError::DivergentValue { state: s0 });
        }
        let root_gap = bounds.gap(s0);
        if root_gap < cfg.alpha {
            stats.converged = true;
            break;
        }
        if !bounds.upper[s0].is_finite() {
            return Err(SolveError::DivergentValue { state: s0 });
        }
        if let Some(deadline) = cfg.deadline {
            if Instant::now() >= deadline {
                break;
            }
        }
        stats.iterations += 1;
        path.clear();
        let mut s = s0;
        while !mdp.is_goal(s) && path.len() < cutoff {
            path.push(s);
            let slot = backup_both(mdp, &mut bounds, s, cfg.value_cap)?;
            stats.backups += 1;
            let transitions = &mdp.action(ActionRef { state: s, slot }).transitions;
            let mut total = 0.0f64;
            for &(succ, p) in transitions {
                total += p * bounds.gap(succ);
            }
            if total == 0.0 || total < bounds.gap(s0) / cfg.tau {
                break;
            }
            if !total.is_finite() {
                // an infinite gap marks an improper successor; step into it
                // so the next backup reports the divergence
                s = transitions
                    .iter()
                    .find(|&&(succ, _)| !bounds.gap(succ).is_finite())
                    .expect("infinite total without infinite term")
                    .0;
                continue;
            }
            let r = rng.next_f64() * total;
            let mut cum = 0.0;
            let mut next = transitions.last().expect("action without outcomes").0;
            for &(succ, p) in transitions {
                cum += p * bounds.gap(succ);
                if r < cum {
                    next = succ;
                    break;
                }
            }
            s = next;
        }
        while let Some(x) = path.pop() {
            backup_both(mdp, &mut bounds, x, cfg.value_cap)?;
            stats.backups += 1;
        }
    }
    stats.v_s0 = 0.5 * (bounds.lower[s0] + bounds.upper[s0]);
    stats.wall_time = start.elapsed();
    Ok((bounds, stats))
}
