//! Deterministic shortest-path problems, the model/environment split and
//! the exact optimal-value oracle used by the test suites.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense index into an enumerable state space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for StateId {
    fn from(i: usize) -> Self {
        StateId(i as u32)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Index into the discrete action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub u16);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ActionId {
    fn from(i: usize) -> Self {
        ActionId(i as u16)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// The planning model: states, actions, goals, model dynamics and costs.
///
/// Costs lie in `[0, 1]` and are strictly positive from non-goal states.
/// `model_step` must be total and deterministic.
pub trait Problem {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn is_goal(&self, s: StateId) -> bool;
    fn model_step(&self, s: StateId, a: ActionId) -> StateId;
    fn cost(&self, s: StateId, a: ActionId) -> f64;

    fn actions(&self) -> ActionIter {
        ActionIter {
            next: 0,
            end: self.num_actions(),
        }
    }
}

/// Iterator over `ActionId(0) .. ActionId(n)`.
#[derive(Clone, Debug)]
pub struct ActionIter {
    next: usize,
    end: usize,
}

impl Iterator for ActionIter {
    type Item = ActionId;

    fn next(&mut self) -> Option<ActionId> {
        if self.next < self.end {
            let a = ActionId::from(self.next);
            self.next += 1;
            Some(a)
        } else {
            None
        }
    }
}

/// A problem whose hidden true dynamics may disagree with the model.
pub trait Environment: Problem {
    fn true_step(&self, s: StateId, a: ActionId) -> StateId;
    fn start(&self) -> StateId;

    /// Coordinates of a state, used by the metric, hyperspheres and features.
    fn coordinates(&self, s: StateId) -> Vec<f64>;

    /// Metric over states; manhattan over `coordinates` unless overridden.
    fn distance(&self, a: StateId, b: StateId) -> f64 {
        manhattan(&self.coordinates(a), &self.coordinates(b))
    }

    /// Whether the environment was built claiming an optimistic model.
    fn claims_optimistic_model(&self) -> bool {
        false
    }
}

pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// True iff the observed successor lies strictly farther than `xi` from the
/// model's prediction.
pub fn is_discrepant<E: Environment + ?Sized>(
    env: &E,
    s_true: StateId,
    s_pred: StateId,
    xi: f64,
) -> bool {
    debug_assert!(xi >= 0.0);
    if s_true == s_pred {
        return false;
    }
    env.distance(s_true, s_pred) > xi
}

/// Membership query over discovered incorrect transitions.
pub trait IncorrectLookup {
    fn contains(&self, s: StateId, a: ActionId) -> bool;
}

impl<T: IncorrectLookup + ?Sized> IncorrectLookup for &T {
    fn contains(&self, s: StateId, a: ActionId) -> bool {
        (**self).contains(s, a)
    }
}

/// The empty incorrect set.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoIncorrect;

impl IncorrectLookup for NoIncorrect {
    fn contains(&self, _: StateId, _: ActionId) -> bool {
        false
    }
}

/// A problem whose costs are inflated to `penalty` on discovered incorrect
/// transitions. Dynamics are the base model's.
pub struct PenalizedCostView<'a, P: ?Sized, X> {
    base: &'a P,
    incorrect: X,
    penalty: f64,
}

impl<'a, P: Problem + ?Sized, X: IncorrectLookup> PenalizedCostView<'a, P, X> {
    /// Penalty defaults to the number of states.
    pub fn new(base: &'a P, incorrect: X) -> Self {
        let penalty = base.num_states() as f64;
        Self {
            base,
            incorrect,
            penalty,
        }
    }

    pub fn with_penalty(base: &'a P, incorrect: X, penalty: f64) -> Self {
        Self {
            base,
            incorrect,
            penalty,
        }
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn penalized_cost(&self, s: StateId, a: ActionId) -> f64 {
        if self.incorrect.contains(s, a) {
            self.penalty
        } else {
            self.base.cost(s, a)
        }
    }
}

impl<P: Problem + ?Sized, X: IncorrectLookup> Problem for PenalizedCostView<'_, P, X> {
    fn num_states(&self) -> usize {
        self.base.num_states()
    }
    fn num_actions(&self) -> usize {
        self.base.num_actions()
    }
    fn is_goal(&self, s: StateId) -> bool {
        self.base.is_goal(s)
    }
    fn model_step(&self, s: StateId, a: ActionId) -> StateId {
        self.base.model_step(s, a)
    }
    fn cost(&self, s: StateId, a: ActionId) -> f64 {
        self.penalized_cost(s, a)
    }
}

/// Which transition function an oracle query should follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    Model,
    True,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    state: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact optimal cost-to-goal for every state under the given step function,
/// by backward uniform-cost search from the goal set.
///
/// States that cannot reach a goal get `f64::INFINITY`.
pub fn dijkstra_optimal_values<P, F>(problem: &P, step: F) -> Vec<f64>
where
    P: Problem + ?Sized,
    F: Fn(StateId, ActionId) -> StateId,
{
    let n = problem.num_states();
    // Reverse adjacency in CSR form: for each successor, (predecessor, cost).
    let mut counts = vec![0u32; n + 1];
    let mut edges: Vec<(u32, u32, f64)> = Vec::with_capacity(n * problem.num_actions());
    for i in 0..n {
        let s = StateId::from(i);
        if problem.is_goal(s) {
            continue;
        }
        for a in problem.actions() {
            let next = step(s, a);
            if next == s {
                continue;
            }
            edges.push((next.0, s.0, problem.cost(s, a)));
            counts[next.index() + 1] += 1;
        }
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut fill = counts.clone();
    let mut preds = vec![(0u32, 0.0f64); edges.len()];
    for &(to, from, c) in &edges {
        let slot = &mut fill[to as usize];
        preds[*slot as usize] = (from, c);
        *slot += 1;
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for (i, d) in dist.iter_mut().enumerate() {
        if problem.is_goal(StateId::from(i)) {
            *d = 0.0;
            heap.push(HeapEntry {
                dist: 0.0,
                state: i as u32,
            });
        }
    }
    while let Some(HeapEntry { dist: d, state }) = heap.pop() {
        if d > dist[state as usize] {
            continue;
        }
        let lo = counts[state as usize] as usize;
        let hi = counts[state as usize + 1] as usize;
        for &(pred, c) in &preds[lo..hi] {
            let nd = d + c;
            if nd < dist[pred as usize] {
                dist[pred as usize] = nd;
                heap.push(HeapEntry {
                    dist: nd,
                    state: pred,
                });
            }
        }
    }
    dist
}

/// Optimal values of an environment under its model or its true dynamics.
pub fn optimal_values<E: Environment + ?Sized>(env: &E, dynamics: Dynamics) -> Vec<f64> {
    match dynamics {
        Dynamics::Model => dijkstra_optimal_values(env, |s, a| env.model_step(s, a)),
        Dynamics::True => dijkstra_optimal_values(env, |s, a| env.true_step(s, a)),
    }
}

/// Checks `V*_model(s) <= V*_true(s)` at every state (the optimistic model
/// condition). Returns the first violating state, if any.
pub fn find_optimism_violation<E: Environment + ?Sized>(env: &E) -> Option<StateId> {
    let model = optimal_values(env, Dynamics::Model);
    let truth = optimal_values(env, Dynamics::True);
    model
        .iter()
        .zip(&truth)
        .position(|(m, t)| *m > *t + 1e-9)
        .map(StateId::from)
}

/// First state from which no goal is reachable under the true dynamics.
pub fn find_dead_end<E: Environment + ?Sized>(env: &E) -> Option<StateId> {
    optimal_values(env, Dynamics::True)
        .iter()
        .position(|v| v.is_infinite())
        .map(StateId::from)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Small explicit graph used across unit tests.
    #[derive(Clone, Debug)]
    pub struct TableEnv {
        pub model: Vec<Vec<u32>>,
        pub truth: Vec<Vec<u32>>,
        pub costs: Vec<Vec<f64>>,
        pub goals: HashSet<u32>,
        pub start: u32,
    }

    impl TableEnv {
        pub fn new(model: Vec<Vec<u32>>, costs: Vec<Vec<f64>>, goals: &[u32]) -> Self {
            Self {
                truth: model.clone(),
                model,
                costs,
                goals: goals.iter().copied().collect(),
                start: 0,
            }
        }

        /// s0 -> s1 -> g with unit costs; action 0 moves forward, action 1 stays.
        pub fn chain() -> Self {
            Self::new(
                vec![vec![1, 0], vec![2, 1], vec![2, 2]],
                vec![vec![1.0, 1.0]; 3],
                &[2],
            )
        }
    }

    impl Problem for TableEnv {
        fn num_states(&self) -> usize {
            self.model.len()
        }
        fn num_actions(&self) -> usize {
            self.model[0].len()
        }
        fn is_goal(&self, s: StateId) -> bool {
            self.goals.contains(&s.0)
        }
        fn model_step(&self, s: StateId, a: ActionId) -> StateId {
            StateId(self.model[s.index()][a.index()])
        }
        fn cost(&self, s: StateId, a: ActionId) -> f64 {
            self.costs[s.index()][a.index()]
        }
    }

    impl Environment for TableEnv {
        fn true_step(&self, s: StateId, a: ActionId) -> StateId {
            StateId(self.truth[s.index()][a.index()])
        }
        fn start(&self) -> StateId {
            StateId(self.start)
        }
        fn coordinates(&self, s: StateId) -> Vec<f64> {
            vec![s.0 as f64]
        }
    }

    struct PairSet(HashSet<(StateId, ActionId)>);

    impl IncorrectLookup for PairSet {
        fn contains(&self, s: StateId, a: ActionId) -> bool {
            self.0.contains(&(s, a))
        }
    }

    #[test]
    fn penalized_cost_uses_state_count_by_default() {
        let model = vec![vec![0u32; 2]; 100];
        let mut costs = vec![vec![1.0; 2]; 100];
        costs[4][1] = 0.5;
        let env = TableEnv::new(model, costs, &[99]);
        let x = PairSet([(StateId(3), ActionId(0))].into_iter().collect());
        let view = PenalizedCostView::new(&env, &x);
        assert_eq!(view.penalized_cost(StateId(3), ActionId(0)), 100.0);
        assert_eq!(view.penalized_cost(StateId(4), ActionId(1)), 0.5);

        let view = PenalizedCostView::with_penalty(&env, &x, 1e6);
        assert_eq!(view.penalized_cost(StateId(3), ActionId(0)), 1e6);
    }

    #[test]
    fn empty_penalty_set_is_passthrough() {
        let env = TableEnv::chain();
        let view = PenalizedCostView::new(&env, NoIncorrect);
        for s in 0..3 {
            for a in env.actions() {
                let s = StateId(s);
                assert_eq!(view.cost(s, a), env.cost(s, a));
            }
        }
    }

    #[test]
    fn discrepancy_is_strict() {
        let env = TableEnv::chain();
        assert!(!is_discrepant(&env, StateId(1), StateId(1), 0.0));
        assert!(is_discrepant(&env, StateId(0), StateId(2), 0.0));
        assert!(!is_discrepant(&env, StateId(0), StateId(1), 1.0));
        assert!(is_discrepant(&env, StateId(0), StateId(2), 1.0));
    }

    #[test]
    fn chain_optimal_values() {
        let env = TableEnv::chain();
        let v = optimal_values(&env, Dynamics::Model);
        assert_eq!(v, vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two_grid_corner() {
        // ids: (x, y) -> y * 2 + x; actions right, up, left, down.
        let step = |s: u32, a: usize| -> u32 {
            let (x, y) = ((s % 2) as i32, (s / 2) as i32);
            let (dx, dy) = [(1, 0), (0, 1), (-1, 0), (0, -1)][a];
            let (nx, ny) = (x + dx, y + dy);
            if (0..2).contains(&nx) && (0..2).contains(&ny) {
                (ny * 2 + nx) as u32
            } else {
                s
            }
        };
        let model = (0..4)
            .map(|s| (0..4).map(|a| step(s, a)).collect())
            .collect();
        let env = TableEnv::new(model, vec![vec![1.0; 4]; 4], &[3]);
        let v = optimal_values(&env, Dynamics::Model);
        assert_eq!(v[0], 2.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn unreachable_states_are_infinite() {
        // s1 only loops on itself.
        let env = TableEnv::new(vec![vec![2], vec![1], vec![2]], vec![vec![1.0]; 3], &[2]);
        let v = optimal_values(&env, Dynamics::True);
        assert_eq!(v[0], 1.0);
        assert!(v[1].is_infinite());
        assert_eq!(find_dead_end(&env), Some(StateId(1)));
    }
}
