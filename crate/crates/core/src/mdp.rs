//! The sparse SSP model and the value-function primitives every solver
//! shares: Q-values, Bellman backups, residuals, and greedy policies.
//!
//! Values are `f64` and may be `+inf`: a state from which no goal is
//! reachable has an infinite optimal cost, and the infinity participates in
//! backups as an absorbing element. The residual of an `inf -> inf` update is
//! defined as zero so converged dead ends do not keep a sweep alive.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Absolute tolerance on the probability sum of one action's outcomes.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Dense state identifier in `0..num_states`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One applicable action of one state, addressed by its slot in that state's
/// action list.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct ActionRef {
    pub state: StateId,
    pub slot: u32,
}

/// A probabilistic action: strictly positive cost and a sparse outcome
/// distribution. Successor ids are distinct within one action and the
/// probabilities sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub cost: f64,
    pub transitions: Vec<(StateId, f64)>,
}

/// Model construction errors. The flat-file parser reports these verbatim,
/// so the fields carry the offending state/action ids.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model must contain at least one state")]
    Empty,
    #[error("initial state {0} is out of range (num_states = {1})")]
    InitialOutOfRange(u32, usize),
    #[error("goal state {0} is out of range (num_states = {1})")]
    GoalOutOfRange(u32, usize),
    #[error("action table has {got} entries but the model declares {expected} states")]
    ActionTableSize { expected: usize, got: usize },
    #[error("goal state {0} must not carry actions")]
    GoalWithActions(u32),
    #[error("non-goal state {0} has no applicable action")]
    MissingActions(u32),
    #[error("state {state} action {slot}: cost {cost} is not strictly positive")]
    NonPositiveCost { state: u32, slot: usize, cost: f64 },
    #[error("state {state} action {slot}: successor {succ} is out of range")]
    SuccessorOutOfRange { state: u32, slot: usize, succ: u32 },
    #[error("state {state} action {slot}: successor {succ} listed twice")]
    DuplicateSuccessor { state: u32, slot: usize, succ: u32 },
    #[error("state {state} action {slot}: probability {prob} is outside (0, 1]")]
    BadProbability { state: u32, slot: usize, prob: f64 },
    #[error("state {state} action {slot}: probabilities sum to {sum}, not 1")]
    ProbabilitySum { state: u32, slot: usize, sum: f64 },
}

/// Runtime solver failure: a value grew past the divergence cap, or a state
/// with infinite value is reachable where a finite one is required. Either
/// way the instance has a state from which no goal can be reached with
/// probability one.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("value at state {state} diverged: no goal is reachable from it with probability 1")]
    DivergentValue { state: StateId },
}

/// An immutable sparse SSP instance: states `0..num_states`, a set of
/// absorbing goal states with no actions, an initial state, and per-state
/// action lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    num_states: usize,
    initial: StateId,
    goal_flags: Vec<bool>,
    goals: Vec<StateId>,
    actions: Vec<Vec<Action>>,
}

impl Mdp {
    /// Validates and assembles a model. `actions` must hold one (possibly
    /// empty) list per state; goals must have empty lists and every other
    /// state at least one action.
    pub fn new(
        num_states: usize,
        initial: StateId,
        mut goals: Vec<StateId>,
        actions: Vec<Vec<Action>>,
    ) -> Result<Self, ModelError> {
        if num_states == 0 {
            return Err(ModelError::Empty);
        }
        if initial.idx() >= num_states {
            return Err(ModelError::InitialOutOfRange(initial.0, num_states));
        }
        if actions.len() != num_states {
            return Err(ModelError::ActionTableSize {
                expected: num_states,
                got: actions.len(),
            });
        }
        let mut goal_flags = vec![false; num_states];
        for &g in &goals {
            if g.idx() >= num_states {
                return Err(ModelError::GoalOutOfRange(g.0, num_states));
            }
            goal_flags[g.idx()] = true;
        }
        goals.sort_unstable();
        goals.dedup();

        for (s, acts) in actions.iter().enumerate() {
            let state = s as u32;
            if goal_flags[s] {
                if !acts.is_empty() {
                    return Err(ModelError::GoalWithActions(state));
                }
                continue;
            }
            if acts.is_empty() {
                return Err(ModelError::MissingActions(state));
            }
            for (slot, act) in acts.iter().enumerate() {
                let cost_ok = act.cost.is_finite() && act.cost > 0.0;
                if !cost_ok {
                    return Err(ModelError::NonPositiveCost {
                        state,
                        slot,
                        cost: act.cost,
                    });
                }
                let mut sum = 0.0;
                let mut seen: Vec<u32> = Vec::with_capacity(act.transitions.len());
                for &(succ, p) in &act.transitions {
                    if succ.idx() >= num_states {
                        return Err(ModelError::SuccessorOutOfRange {
                            state,
                            slot,
                            succ: succ.0,
                        });
                    }
                    if seen.contains(&succ.0) {
                        return Err(ModelError::DuplicateSuccessor {
                            state,
                            slot,
                            succ: succ.0,
                        });
                    }
                    seen.push(succ.0);
                    if !(p > 0.0 && p <= 1.0) || p.is_nan() {
                        return Err(ModelError::BadProbability { state, slot, prob: p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                    return Err(ModelError::ProbabilitySum { state, slot, sum });
                }
            }
        }

        Ok(Mdp {
            num_states,
            initial,
            goal_flags,
            goals,
            actions,
        })
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn initial(&self) -> StateId {
        self.initial
    }

    #[inline]
    pub fn is_goal(&self, s: StateId) -> bool {
        self.goal_flags[s.idx()]
    }

    /// Goal states, ascending.
    pub fn goals(&self) -> &[StateId] {
        &self.goals
    }

    #[inline]
    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.actions[s.idx()]
    }

    #[inline]
    pub fn action(&self, a: ActionRef) -> &Action {
        &self.actions[a.state.idx()][a.slot as usize]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states as u32).map(StateId)
    }

    pub fn total_action_count(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    pub fn total_transition_count(&self) -> usize {
        self.actions
            .iter()
            .flat_map(|acts| acts.iter())
            .map(|a| a.transitions.len())
            .sum()
    }
}

/// A value function over all states. Goal values are zero and stay zero
/// under every operation in this crate.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFn {
    values: Vec<f64>,
}

impl ValueFn {
    pub fn zeros(num_states: usize) -> Self {
        ValueFn {
            values: vec![0.0; num_states],
        }
    }

    pub fn constant(num_states: usize, v: f64) -> Self {
        ValueFn {
            values: vec![v; num_states],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ValueFn { values }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn set(&mut self, s: StateId, v: f64) {
        self.values[s.idx()] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl Index<StateId> for ValueFn {
    type Output = f64;
    #[inline]
    fn index(&self, s: StateId) -> &f64 {
        &self.values[s.idx()]
    }
}

impl IndexMut<StateId> for ValueFn {
    #[inline]
    fn index_mut(&mut self, s: StateId) -> &mut f64 {
        &mut self.values[s.idx()]
    }
}

/// Paired lower and upper value functions sandwiching the optimal values.
#[derive(Clone, Debug)]
pub struct ValueBounds {
    pub lower: ValueFn,
    pub upper: ValueFn,
}

impl ValueBounds {
    pub fn new(lower: ValueFn, upper: ValueFn) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        ValueBounds { lower, upper }
    }

    /// Upper minus lower at one state; `inf - inf` counts as zero gap.
    pub fn gap(&self, s: StateId) -> f64 {
        let (l, u) = (self.lower[s], self.upper[s]);
        if l == u {
            0.0
        } else {
            u - l
        }
    }
}

/// One chosen action slot per non-goal state; `None` for goals and for
/// states a solver never had to resolve.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    choices: Vec<Option<u32>>,
}

impl Policy {
    pub fn undefined(num_states: usize) -> Self {
        Policy {
            choices: vec![None; num_states],
        }
    }

    pub fn set(&mut self, s: StateId, slot: u32) {
        self.choices[s.idx()] = Some(slot);
    }

    pub fn get(&self, s: StateId) -> Option<ActionRef> {
        self.choices[s.idx()].map(|slot| ActionRef { state: s, slot })
    }

    pub fn defined_count(&self) -> usize {
        self.choices.iter().filter(|c| c.is_some()).count()
    }
}

/// Per (state, action-slot) elimination flags. Once a slot is eliminated it
/// is never reinstated during a run, and at least one slot per non-goal
/// state always survives.
#[derive(Clone, Debug)]
pub struct ActionMask {
    offsets: Vec<usize>,
    eliminated: Vec<bool>,
    count: u64,
}

impl ActionMask {
    pub fn all_surviving(mdp: &Mdp) -> Self {
        let mut offsets = Vec::with_capacity(mdp.num_states() + 1);
        let mut total = 0usize;
        offsets.push(0);
        for s in mdp.states() {
            total += mdp.actions(s).len();
            offsets.push(total);
        }
        ActionMask {
            offsets,
            eliminated: vec![false; total],
            count: 0,
        }
    }

    #[inline]
    fn flat(&self, s: StateId, slot: u32) -> usize {
        self.offsets[s.idx()] + slot as usize
    }

    #[inline]
    pub fn survives(&self, s: StateId, slot: u32) -> bool {
        !self.eliminated[self.flat(s, slot)]
    }

    pub fn eliminate(&mut self, s: StateId, slot: u32) {
        let i = self.flat(s, slot);
        if !self.eliminated[i] {
            self.eliminated[i] = true;
            self.count += 1;
        }
    }

    pub fn eliminated_count(&self) -> u64 {
        self.count
    }

    pub fn surviving_count(&self, s: StateId) -> usize {
        let (lo, hi) = (self.offsets[s.idx()], self.offsets[s.idx() + 1]);
        self.eliminated[lo..hi].iter().filter(|e| !**e).count()
    }
}

/// A subset of states with O(1) membership and an ascending member list.
#[derive(Clone, Debug)]
pub struct StateSet {
    flags: Vec<bool>,
    members: Vec<StateId>,
}

impl StateSet {
    pub fn all(num_states: usize) -> Self {
        StateSet {
            flags: vec![true; num_states],
            members: (0..num_states as u32).map(StateId).collect(),
        }
    }

    pub fn from_members(num_states: usize, mut members: Vec<StateId>) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut flags = vec![false; num_states];
        for &s in &members {
            flags[s.idx()] = true;
        }
        StateSet { flags, members }
    }

    #[inline]
    pub fn contains(&self, s: StateId) -> bool {
        self.flags[s.idx()]
    }

    /// Members in ascending id order.
    pub fn members(&self) -> &[StateId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Residual of a value update; `inf -> inf` (and any exact no-op) is zero.
#[inline]
pub(crate) fn residual(old: f64, new: f64) -> f64 {
    if old == new {
        0.0
    } else {
        (new - old).abs()
    }
}

/// One-step lookahead cost of taking `a` and following the values in `v`
/// afterwards. Infinite if any positive-probability successor is infinite.
pub fn q_value(mdp: &Mdp, v: &ValueFn, a: ActionRef) -> f64 {
    let act = mdp.action(a);
    let mut total = act.cost;
    for &(succ, p) in &act.transitions {
        // p == 0 never occurs in a validated model; the guard pins the
        // "0 * inf = 0" convention for values built by hand.
        if p > 0.0 {
            total += p * v[succ];
        }
    }
    total
}

/// In-place Bellman backup of one non-goal state. Returns the residual.
pub fn bellman_backup(mdp: &Mdp, v: &mut ValueFn, s: StateId) -> f64 {
    debug_assert!(!mdp.is_goal(s));
    let n_actions = mdp.actions(s).len();
    let mut best = f64::INFINITY;
    for slot in 0..n_actions as u32 {
        let q = q_value(mdp, v, ActionRef { state: s, slot });
        if q < best {
            best = q;
        }
    }
    let old = v[s];
    v.set(s, best);
    residual(old, best)
}

/// Argmin action under one-step lookahead; ties go to the lowest slot.
pub fn greedy_action(mdp: &Mdp, v: &ValueFn, s: StateId) -> ActionRef {
    debug_assert!(!mdp.is_goal(s));
    let n_actions = mdp.actions(s).len();
    assert!(n_actions > 0, "greedy_action on a state without actions");
    let mut best = ActionRef { state: s, slot: 0 };
    let mut best_q = q_value(mdp, v, best);
    for slot in 1..n_actions as u32 {
        let a = ActionRef { state: s, slot };
        let q = q_value(mdp, v, a);
        if q < best_q {
            best_q = q;
            best = a;
        }
    }
    best
}

/// Greedy policy over the states reachable from the initial state when the
/// greedy choices themselves are followed. Fails if any such state has an
/// infinite value.
pub fn extract_policy(mdp: &Mdp, v: &ValueFn) -> Result<Policy, SolveError> {
    let mut policy = Policy::undefined(mdp.num_states());
    let mut visited = vec![false; mdp.num_states()];
    let mut stack = vec![mdp.initial()];
    visited[mdp.initial().idx()] = true;
    while let Some(s) = stack.pop() {
        if mdp.is_goal(s) {
            continue;
        }
        if !v[s].is_finite() {
            return Err(SolveError::DivergentValue { state: s });
        }
        let a = greedy_action(mdp, v, s);
        policy.set(s, a.slot);
        for &(succ, _) in &mdp.action(a).transitions {
            if !visited[succ.idx()] {
                visited[succ.idx()] = true;
                stack.push(succ);
            }
        }
    }
    Ok(policy)
}

/// Largest residual a backup would produce over the non-goal states of
/// `subset`, without mutating `v`.
pub fn bellman_error(mdp: &Mdp, v: &ValueFn, subset: &[StateId]) -> f64 {
    let mut worst = 0.0f64;
    for &s in subset {
        if mdp.is_goal(s) {
            continue;
        }
        let n_actions = mdp.actions(s).len();
        let mut best = f64::INFINITY;
        for slot in 0..n_actions as u32 {
            let q = q_value(mdp, v, ActionRef { state: s, slot });
            if q < best {
                best = q;
            }
        }
        worst = worst.max(residual(v[s], best));
    }
    worst
}
