//! Shared hand-built instances for unit tests.

use crate::mdp::{Action, Mdp, StateId};

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

/// Exact optimal values of [`chained_loops`].
pub const CHAINED_LOOPS_EXACT: [f64; 6] = [9.0, 8.0, 5.0, 4.0, 1.0, 0.0];

/// Six states, goal 5, unit costs, two 2-cycles chained ahead of a tail:
///
/// ```text
///   0 <-> 1 -> (2 <-> 3) -> 4 -> 5
/// ```
///
/// Decomposes into {5}, {4}, {2,3}, {0,1} in that solve order.
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
