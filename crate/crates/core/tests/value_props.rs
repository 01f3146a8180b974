//! Property tests for the Bellman primitives.

mod common;

use common::*;
use proptest::prelude::*;
use topomdp::bounds::h_min;
use topomdp::mdp::{bellman_backup, q_value, Mdp, StateId, ValueFn};
use topomdp::rng::SplitMix64;

fn finite_values(seed: u64, mdp: &Mdp, scale: f64) -> ValueFn {
    let mut rng = SplitMix64::new(seed);
    let mut v = ValueFn::zeros(mdp.num_states());
    for s in mdp.states() {
        if !mdp.is_goal(s) {
            v.set(s, rng.next_f64() * scale);
        }
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_value_is_affine_in_the_value_function(seed in 0u64..10_000, n in 3usize..40, lambda in 0.0f64..1.0) {
        let mdp = random_mdp(seed, n, 3, 3, true);
        let v1 = finite_values(seed ^ 0xA5A5, &mdp, 10.0);
        let v2 = finite_values(seed ^ 0x5A5A, &mdp, 10.0);
        let mix = ValueFn::from_vec(
            v1.as_slice()
                .iter()
                .zip(v2.as_slice())
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        );
        for s in mdp.states() {
            if mdp.is_goal(s) {
                continue;
            }
            for slot in 0..mdp.actions(s).len() as u32 {
                let a = aref(s.0, slot);
                let qm = q_value(&mdp, &mix, a);
                let q1 = q_value(&mdp, &v1, a);
                let q2 = q_value(&mdp, &v2, a);
                prop_assert!((qm - (lambda * q1 + (1.0 - lambda) * q2)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn backups_preserve_admissibility(seed in 0u64..10_000, n in 3usize..50, f in 0.1f64..1.0) {
        let mdp = random_mdp(seed, n, 3, 3, true);
        let oracle = oracle_values(&mdp);
        // start below the optimum and hammer states in a scrambled order
        let mut v = ValueFn::from_vec(oracle.iter().map(|x| x * f).collect());
        let mut rng = SplitMix64::new(seed ^ 0xBEEF);
        for _ in 0..4 * n {
            let s = StateId(rng.below(n) as u32);
            if !mdp.is_goal(s) {
                bellman_backup(&mdp, &mut v, s);
            }
        }
        for s in mdp.states() {
            prop_assert!(v[s] <= oracle[s.idx()] + 1e-9, "lower bound crossed at {}", s);
        }
    }

    #[test]
    fn backups_preserve_upper_bounds(seed in 0u64..10_000, n in 3usize..50, f in 0.0f64..2.0) {
        let mdp = random_mdp(seed, n, 3, 3, true);
        let oracle = oracle_values(&mdp);
        let mut v = ValueFn::from_vec(
            oracle
                .iter()
                .enumerate()
                .map(|(i, x)| if mdp.is_goal(StateId(i as u32)) { 0.0 } else { x * (1.0 + f) + 0.5 })
                .collect(),
        );
        let mut rng = SplitMix64::new(seed ^ 0xF00D);
        for _ in 0..4 * n {
            let s = StateId(rng.below(n) as u32);
            if !mdp.is_goal(s) {
                bellman_backup(&mdp, &mut v, s);
            }
        }
        for s in mdp.states() {
            prop_assert!(v[s] >= oracle[s.idx()] - 1e-9, "upper bound crossed at {}", s);
        }
    }

    #[test]
    fn goals_stay_pinned_at_zero(seed in 0u64..10_000, n in 3usize..40) {
        let mdp = random_mdp(seed, n, 3, 3, true);
        let mut v = h_min(&mdp);
        let mut rng = SplitMix64::new(seed);
        for _ in 0..3 * n {
            let s = StateId(rng.below(n) as u32);
            if !mdp.is_goal(s) {
                bellman_backup(&mdp, &mut v, s);
            }
        }
        for &g in mdp.goals() {
            prop_assert_eq!(v[g], 0.0);
        }
    }

    #[test]
    fn unit_chain_converges_in_length_many_sweeps(len in 2usize..30, order_seed in 0u64..1000) {
        // k unit-cost deterministic steps to the goal: after k sweeps in any
        // per-sweep order, the start state holds exactly k
        let mut actions: Vec<Vec<_>> = (0..len).map(|i| vec![det(1.0, i as u32 + 1)]).collect();
        actions.push(vec![]);
        let mdp = Mdp::new(len + 1, StateId(0), vec![StateId(len as u32)], actions).unwrap();
        let mut v = ValueFn::zeros(len + 1);
        let mut rng = SplitMix64::new(order_seed);
        for _ in 0..len {
            // a random permutation of all non-goal states
            let mut sweep: Vec<u32> = (0..len as u32).collect();
            for i in (1..sweep.len()).rev() {
                let j = rng.below(i + 1);
                sweep.swap(i, j);
            }
            for &s in &sweep {
                bellman_backup(&mdp, &mut v, StateId(s));
            }
        }
        prop_assert_eq!(v[StateId(0)], len as f64);
    }
}
