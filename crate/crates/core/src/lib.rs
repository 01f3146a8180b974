//! Solvers and tooling for stochastic shortest path problems: MDPs with
//! strictly positive action costs and absorbing goal states, solved for the
//! minimum expected cost to reach a goal.
//!
//! The crate is organized around a sparse, immutable [`mdp::Mdp`] model and a
//! family of optimal solvers that share its Bellman-backup primitives:
//!
//! * [`vi`] — Gauss-Seidel value iteration, optionally with action
//!   elimination, and topological value iteration (solve strongly connected
//!   components of the transition graph one at a time, most downstream
//!   first).
//! * [`ftvi`] — focused topological value iteration: a short bounded-search
//!   phase eliminates provably suboptimal actions before the topological
//!   solve runs on the pruned graph.
//! * [`baselines`] — heuristic-search comparison solvers (ILAO*, LRTDP,
//!   BRTDP).
//! * [`bounds`] — the admissible lower-bound heuristic and the initialized
//!   upper bound the bounded solvers consume.
//! * [`graph`] — reachability graphs and Kosaraju's strongly-connected
//!   component decomposition with a topological numbering.
//! * [`generators`] — deterministic, seedable benchmark instance families.

pub mod baselines;
pub mod bounds;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod ftvi;
pub mod generators;
pub mod graph;
pub mod mdp;
pub mod rng;
pub mod stats;
pub mod vi;

pub use mdp::{Action, ActionMask, ActionRef, Mdp, Policy, SolveError, StateId, ValueBounds, ValueFn};
pub use stats::SolveStats;
