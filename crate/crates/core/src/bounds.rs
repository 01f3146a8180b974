//! Domain-independent value bounds.
//!
//! The lower bound is the all-outcomes determinization: every (action,
//! successor) pair becomes a deterministic edge with the action's cost, and
//! the relaxed problem is solved exactly by a backward best-first (Dijkstra)
//! search from the goals. Plain breadth-first search would only be exact for
//! uniform costs; the best-first ordering computes the relaxation exactly for
//! any positive costs and degrades to BFS when costs are uniform.
//!
//! The upper bound starts at zero on goals and infinity elsewhere, then runs
//! backward best-first passes from the goals, re-backing each popped state up
//! from the current upper values. Infinity is a fixed point of that backup on
//! cyclically dependent states, so after the first pass any state that can
//! still reach a goal with probability one but sits at infinity gets a finite
//! value by evaluating one proper policy (the relaxation-greedy one) to a
//! tight residual and padding the result; later passes only tighten it.
//! States that cannot reach a goal with probability one keep infinity, which
//! is their true optimal cost.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::graph::proper_states;
use crate::mdp::{q_value, ActionRef, Mdp, StateId, ValueFn};

/// Min-heap entry ordered by key, ties by state id, so pop order is
/// deterministic for a given input.
#[derive(PartialEq)]
struct HeapEntry {
    key: f64,
    state: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .key
            .partial_cmp(&self.key)
            .unwrap()
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Admissible lower bound: the exact solution of the deterministic
/// relaxation. Zero on goals; infinite where no goal is reachable.
pub fn h_min(mdp: &Mdp) -> ValueFn {
    let n = mdp.num_states();
    // reversed relaxed edges: rev[t] holds (source, edge cost)
    let mut rev: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for s in mdp.states() {
        for act in mdp.actions(s) {
            for &(t, _) in &act.transitions {
                rev[t.idx()].push((s.0, act.cost));
            }
        }
    }

    let mut dist = ValueFn::constant(n, f64::INFINITY);
    let mut heap = BinaryHeap::new();
    for &g in mdp.goals() {
        dist.set(g, 0.0);
        heap.push(HeapEntry { key: 0.0, state: g.0 });
    }
    while let Some(HeapEntry { key, state }) = heap.pop() {
        let s = StateId(state);
        if key > dist[s] {
            continue;
        }
        for &(p, cost) in &rev[state as usize] {
            let cand = key + cost;
            if cand < dist[StateId(p)] {
                dist.set(StateId(p), cand);
                heap.push(HeapEntry { key: cand, state: p });
            }
        }
    }
    dist
}

/// Pointwise upper bound on the optimal values: zero on goals, infinite on
/// states that cannot reach a goal with probability one, finite (and
/// monotonically tighter with more `passes`) everywhere else.
pub fn init_upper_bound(mdp: &Mdp, passes: usize) -> ValueFn {
    assert!(passes >= 1, "init_upper_bound needs at least one pass");
    let n = mdp.num_states();
    let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
    for s in mdp.states() {
        for act in mdp.actions(s) {
            for &(t, _) in &act.transitions {
                rev[t.idx()].push(s.0);
            }
        }
    }
    for preds in &mut rev {
        preds.sort_unstable();
        preds.dedup();
    }

    let mut upper = ValueFn::constant(n, f64::INFINITY);
    for &g in mdp.goals() {
        upper.set(g, 0.0);
    }
    for pass in 1..=passes {
        backward_pass(mdp, &rev, &mut upper);
        if pass == 1 {
            fill_stranded(mdp, &mut upper);
        }
    }
    upper
}

/// One backward best-first sweep: pop the state with the lowest current
/// upper value, re-back it up from the current values, enqueue its
/// predecessors. Every state backward-reachable from a goal is backed up
/// exactly once per pass.
fn backward_pass(mdp: &Mdp, rev: &[Vec<u32>], upper: &mut ValueFn) {
    let n = mdp.num_states();
    let mut visited = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &g in mdp.goals() {
        heap.push(HeapEntry { key: 0.0, state: g.0 });
    }
    while let Some(HeapEntry { state, .. }) = heap.pop() {
        if visited[state as usize] {
            continue;
        }
        visited[state as usize] = true;
        let s = StateId(state);
        if !mdp.is_goal(s) {
            let mut best = f64::INFINITY;
            for slot in 0..mdp.actions(s).len() as u32 {
                let q = q_value(mdp, upper, ActionRef { state: s, slot });
                if q < best {
                    best = q;
                }
            }
            upper.set(s, best);
        }
        for &p in &rev[state as usize] {
            if !visited[p as usize] {
                heap.push(HeapEntry {
                    key: upper[StateId(p)],
                    state: p,
                });
            }
        }
    }
}

/// Residual threshold and padding for the stranded-state policy evaluation.
const FILL_RESIDUAL: f64 = 1e-12;
const FILL_PAD: f64 = 1e-6;
const FILL_MAX_SWEEPS: usize = 200_000;

/// Gives a finite upper value to every state that can reach a goal with
/// probability one but is still at infinity. Runs min-over-actions sweeps on
/// the stranded set, restricted to actions whose successors all stay proper
/// and reading already finite upper values at the boundary. The fixed point
/// is the optimal cost of reaching the boundary or a goal through proper
/// actions, which dominates the true optimal cost; the padding absorbs the
/// remaining from-below iteration gap.
fn fill_stranded(mdp: &Mdp, upper: &mut ValueFn) {
    let proper = proper_states(mdp);
    let stranded: Vec<StateId> = mdp
        .states()
        .filter(|&s| proper[s.idx()] && upper[s].is_infinite())
        .collect();
    if stranded.is_empty() {
        return;
    }

    let h = h_min(mdp);
    let mut is_stranded = vec![false; mdp.num_states()];
    for &s in &stranded {
        is_stranded[s.idx()] = true;
    }

    // Per stranded state, the actions confined to proper states; a proper
    // state always has at least one.
    let usable: Vec<(StateId, Vec<u32>)> = stranded
        .iter()
        .map(|&s| {
            let slots: Vec<u32> = mdp
                .actions(s)
                .iter()
                .enumerate()
                .filter(|(_, act)| act.transitions.iter().all(|&(t, _)| proper[t.idx()]))
                .map(|(slot, _)| slot as u32)
                .collect();
            assert!(!slots.is_empty(), "proper state {s} without a proper action");
            (s, slots)
        })
        .collect();

    let mut val = vec![0.0f64; mdp.num_states()];
    for &s in &stranded {
        val[s.idx()] = if h[s].is_finite() { h[s] } else { 0.0 };
    }
    let mut converged = false;
    for _ in 0..FILL_MAX_SWEEPS {
        let mut worst = 0.0f64;
        for (s, slots) in &usable {
            let mut best = f64::INFINITY;
            for &slot in slots {
                let act = &mdp.actions(*s)[slot as usize];
                let mut total = act.cost;
                for &(t, p) in &act.transitions {
                    total += p * if is_stranded[t.idx()] { val[t.idx()] } else { upper[t] };
                }
                if total < best {
                    best = total;
                }
            }
            worst = worst.max((best - val[s.idx()]).abs());
            val[s.idx()] = best;
        }
        if worst < FILL_RESIDUAL {
            converged = true;
            break;
        }
    }
    if !converged {
        // leave the stranded states at infinity rather than write values
        // that might undercut the optimal cost
        return;
    }
    for &s in &stranded {
        upper.set(s, val[s.idx()] * (1.0 + FILL_PAD) + FILL_PAD);
    }
}

/// Pointwise scaling of a reference value function by `f` in `(0, 1]`.
/// Scaling an admissible estimate keeps it admissible; goals stay at zero.
pub fn scale_heuristic(reference: &ValueFn, f: f64) -> ValueFn {
    assert!(f > 0.0 && f <= 1.0, "scale factor must lie in (0, 1]");
    ValueFn::from_vec(reference.as_slice().iter().map(|&v| f * v).collect())
}
