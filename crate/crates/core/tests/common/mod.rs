//! Independent oracles and instance builders shared by the integration
//! tests. Everything here recomputes values straight from the model
//! definition — Jacobi sweeps, direct Q sums, transitive closure — so the
//! solvers under test are never checked against their own code paths.

#![allow(dead_code)]

use topomdp::mdp::{Action, ActionRef, Mdp, Policy, StateId, ValueFn};
use topomdp::rng::SplitMix64;

/// Synchronous (Jacobi) value iteration from zero. Independent of the
/// library's Gauss-Seidel solvers. Returns `Err(state)` when a value climbs
/// past the cap.
pub fn naive_vi(mdp: &Mdp, delta: f64, cap: f64) -> Result<Vec<f64>, u32> {
    let n = mdp.num_states();
    let mut v = vec![0.0f64; n];
    loop {
        let mut next = vec![0.0f64; n];
        let mut worst = 0.0f64;
        for s in 0..n {
            let sid = StateId(s as u32);
            if mdp.is_goal(sid) {
                continue;
            }
            let mut best = f64::INFINITY;
            for act in mdp.actions(sid) {
                let mut q = act.cost;
                for &(t, p) in &act.transitions {
                    q += p * v[t.idx()];
                }
                if q < best {
                    best = q;
                }
            }
            if best.is_finite() && best > cap {
                return Err(s as u32);
            }
            next[s] = best;
            let d = (next[s] - v[s]).abs();
            if d.is_nan() {
                // inf -> inf
                continue;
            }
            if d > worst {
                worst = d;
            }
        }
        v = next;
        if worst < delta {
            return Ok(v);
        }
    }
}

/// Optimal values at high precision, panicking on improper instances.
pub fn oracle_values(mdp: &Mdp) -> Vec<f64> {
    naive_vi(mdp, 1e-10, 1e12).expect("oracle diverged on a supposedly proper instance")
}

/// Direct Q-value of (s, slot) under a fixed value vector.
pub fn q_of(mdp: &Mdp, v: &[f64], s: StateId, slot: usize) -> f64 {
    let act = &mdp.actions(s)[slot];
    let mut q = act.cost;
    for &(t, p) in &act.transitions {
        q += p * v[t.idx()];
    }
    q
}

/// Value of a fixed policy by synchronous linear iteration from zero.
/// States without a defined choice keep value zero; callers should only
/// read entries on the policy's closed reachable set.
pub fn naive_policy_value(mdp: &Mdp, policy: &Policy, delta: f64) -> Vec<f64> {
    let n = mdp.num_states();
    let mut v = vec![0.0f64; n];
    for _ in 0..2_000_000u64 {
        let mut worst = 0.0f64;
        let mut next = vec![0.0f64; n];
        for s in 0..n {
            let sid = StateId(s as u32);
            if mdp.is_goal(sid) {
                continue;
            }
            let Some(choice) = policy.get(sid) else {
                continue;
            };
            let act = &mdp.actions(sid)[choice.slot as usize];
            let mut q = act.cost;
            for &(t, p) in &act.transitions {
                q += p * v[t.idx()];
            }
            next[s] = q;
            worst = worst.max((next[s] - v[s]).abs());
        }
        v = next;
        if worst < delta {
            break;
        }
    }
    v
}

/// Transitive closure by Floyd-Warshall over a raw edge list.
pub fn closure(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
    }
    for &(a, b) in edges {
        reach[a as usize][b as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if !reach[i][k] {
                continue;
            }
            for j in 0..n {
                if reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach
}

/// Arbitrary random SSP instance: goal is the last state, initial the
/// first, action and successor counts drawn up to the given limits. With
/// `repair` set, every state that cannot reach the goal gets a direct
/// deterministic edge to it, making the instance proper.
pub fn random_mdp(
    seed: u64,
    n: usize,
    max_actions: usize,
    max_succ: usize,
    repair: bool,
) -> Mdp {
    assert!(n >= 2);
    let mut rng = SplitMix64::new(seed);
    let goal = (n - 1) as u32;
    let mut actions: Vec<Vec<Action>> = vec![Vec::new(); n];
    for (s, acts) in actions.iter_mut().enumerate().take(n - 1) {
        let n_actions = 1 + rng.below(max_actions);
        for _ in 0..n_actions {
            let k = (1 + rng.below(max_succ)).min(n - 1);
            let mut succs: Vec<u32> = Vec::new();
            while succs.len() < k {
                let mut t = rng.below(n - 1);
                if t >= s {
                    t += 1; // skip self
                }
                if t == s {
                    t = goal as usize;
                }
                if !succs.contains(&(t as u32)) {
                    succs.push(t as u32);
                }
            }
            succs.sort_unstable();
            let mut probs: Vec<f64> = (0..k).map(|_| 0.05 + rng.next_f64()).collect();
            let total: f64 = probs.iter().sum();
            for p in &mut probs {
                *p /= total;
            }
            let cost = 0.5 + rng.next_f64() * 4.5;
            acts.push(Action {
                cost,
                transitions: succs.into_iter().map(StateId).zip(probs).collect(),
            });
        }
    }
    if repair {
        // backward reachability from the goal
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (s, acts) in actions.iter().enumerate() {
            for act in acts {
                for &(t, _) in &act.transitions {
                    rev[t.idx()].push(s as u32);
                }
            }
        }
        let mut alive = vec![false; n];
        alive[goal as usize] = true;
        let mut stack = vec![goal];
        while let Some(v) = stack.pop() {
            for &p in &rev[v as usize] {
                if !alive[p as usize] {
                    alive[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        for (s, acts) in actions.iter_mut().enumerate().take(n - 1) {
            if !alive[s] {
                acts.push(Action {
                    cost: 5.0,
                    transitions: vec![(StateId(goal), 1.0)],
                });
            }
        }
    }
    Mdp::new(n, StateId(0), vec![StateId(goal)], actions).expect("random instance invalid")
}

pub fn det(cost: f64, succ: u32) -> Action {
    Action {
        cost,
        transitions: vec![(StateId(succ), 1.0)],
    }
}

pub fn split(cost: f64, a: u32, b: u32) -> Action {
    Action {
        cost,
        transitions: vec![(StateId(a), 0.5), (StateId(b), 0.5)],
    }
}

/// The two-cycle chain used across the suite:
/// 0 <-> 1 -> (2 <-> 3) -> 4 -> 5(goal), unit costs,
/// optimal values [9, 8, 5, 4, 1, 0].
pub fn chained_loops() -> Mdp {
    Mdp::new(
        6,
        StateId(0),
        vec![StateId(5)],
        vec![
            vec![det(1.0, 1)],
            vec![split(1.0, 0, 2)],
            vec![det(1.0, 3)],
            vec![split(1.0, 2, 4)],
            vec![det(1.0, 5)],
            vec![],
        ],
    )
    .unwrap()
}

/// Max residual of `v` against a one-step lookahead, computed directly.
pub fn naive_bellman_error(mdp: &Mdp, v: &ValueFn) -> f64 {
    let mut worst = 0.0f64;
    for s in mdp.states() {
        if mdp.is_goal(s) {
            continue;
        }
        let mut best = f64::INFINITY;
        for slot in 0..mdp.actions(s).len() {
            let q = q_of(mdp, v.as_slice(), s, slot);
            if q < best {
                best = q;
            }
        }
        let d = (best - v[s]).abs();
        if !d.is_nan() && d > worst {
            worst = d;
        }
    }
    worst
}

/// Convenience: a `ValueFn` from the oracle vector.
pub fn value_fn(values: Vec<f64>) -> ValueFn {
    ValueFn::from_vec(values)
}

/// All states as a vec, ascending.
pub fn all_states(mdp: &Mdp) -> Vec<StateId> {
    mdp.states().collect()
}

/// Greedy slot under a raw value vector, lowest slot on ties.
pub fn greedy_slot(mdp: &Mdp, v: &[f64], s: StateId) -> u32 {
    let mut best_q = f64::INFINITY;
    let mut best = 0u32;
    for slot in 0..mdp.actions(s).len() {
        let q = q_of(mdp, v, s, slot);
        if q < best_q {
            best_q = q;
            best = slot as u32;
        }
    }
    best
}

/// Reference for ActionRef construction in tests.
pub fn aref(s: u32, slot: u32) -> ActionRef {
    ActionRef {
        state: StateId(s),
        slot,
    }
}
