//! Running cost-to-goal estimates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::problem::{ActionId, Problem, StateId};

/// Read access to a state-value estimate.
pub trait ValueLookup {
    fn value(&self, s: StateId) -> f64;
}

/// Read access to a state-action value estimate.
pub trait QLookup {
    fn q_value(&self, s: StateId, a: ActionId) -> f64;
}

impl<T: ValueLookup + ?Sized> ValueLookup for &T {
    fn value(&self, s: StateId) -> f64 {
        (**self).value(s)
    }
}

impl<T: QLookup + ?Sized> QLookup for &T {
    fn q_value(&self, s: StateId, a: ActionId) -> f64 {
        (**self).q_value(s, a)
    }
}

/// Dense table of `V(s)`; goal entries are pinned at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(num_states: usize) -> Self {
        Self {
            values: vec![0.0; num_states],
        }
    }

    /// Builds a table from initial estimates, forcing goals to zero.
    pub fn from_estimates<P: Problem + ?Sized>(problem: &P, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), problem.num_states());
        for (i, v) in values.iter_mut().enumerate() {
            if problem.is_goal(StateId::from(i)) {
                *v = 0.0;
            }
        }
        Self { values }
    }

    pub fn get(&self, s: StateId) -> f64 {
        self.values[s.index()]
    }

    pub fn set(&mut self, s: StateId, v: f64) {
        debug_assert!(v.is_finite(), "non-finite value for {s}");
        self.values[s.index()] = v;
    }

    pub fn apply(&mut self, updates: &[(StateId, f64)]) {
        for &(s, v) in updates {
            self.set(s, v);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl ValueLookup for ValueTable {
    fn value(&self, s: StateId) -> f64 {
        self.get(s)
    }
}

/// Sparse `Q(s, a)` entries.
///
/// The search only consults Q for pairs in the incorrect set, and every such
/// pair is written when it is inserted, so absent entries are never priced.
/// They read as zero, which is a valid lower bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    entries: HashMap<(StateId, ActionId), f64>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.entries.get(&(s, a)).copied()
    }

    pub fn set(&mut self, s: StateId, a: ActionId, q: f64) {
        debug_assert!(q.is_finite() && q >= 0.0);
        self.entries.insert((s, a), q);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((StateId, ActionId), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

impl QLookup for QTable {
    fn q_value(&self, s: StateId, a: ActionId) -> f64 {
        self.get(s, a).unwrap_or(0.0)
    }
}

/// Dense `|S| x |A|` Q table used by the Q-learning baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseQTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl DenseQTable {
    /// `Q(s, a) = c(s, a) + V0(f̂(s, a))`.
    pub fn from_model<P: Problem + ?Sized>(problem: &P, initial: &[f64]) -> Self {
        let num_actions = problem.num_actions();
        let mut values = Vec::with_capacity(problem.num_states() * num_actions);
        for i in 0..problem.num_states() {
            let s = StateId::from(i);
            for a in problem.actions() {
                let next = problem.model_step(s, a);
                let h = if problem.is_goal(next) {
                    0.0
                } else {
                    initial[next.index()]
                };
                values.push(problem.cost(s, a) + h);
            }
        }
        Self {
            num_actions,
            values,
        }
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        let lo = s.index() * self.num_actions;
        &self.values[lo..lo + self.num_actions]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, q: f64) {
        self.values[s.index() * self.num_actions + a.index()] = q;
    }

    /// Lowest-valued action, ties to the lowest id.
    pub fn argmin(&self, s: StateId) -> (ActionId, f64) {
        argmin_lowest(self.row(s))
    }
}

impl QLookup for DenseQTable {
    fn q_value(&self, s: StateId, a: ActionId) -> f64 {
        self.row(s)[a.index()]
    }
}

pub(crate) fn argmin_lowest(row: &[f64]) -> (ActionId, f64) {
    let mut best = 0;
    for (i, q) in row.iter().enumerate().skip(1) {
        if *q < row[best] {
            best = i;
        }
    }
    (ActionId::from(best), row[best])
}
