//! Deterministic Q-learning with model-initialized values.

use super::{Agent, AgentError, Branch, StepRecord};
use crate::problem::{Environment, StateId};
use crate::store::DenseQTable;

#[derive(Clone, Debug)]
pub struct QLearningAgent {
    q: DenseQTable,
}

impl QLearningAgent {
    /// `Q(s, a) = c(s, a) + V0(f̂(s, a))`.
    pub fn new<E: Environment + ?Sized>(env: &E, initial: &[f64]) -> Self {
        Self {
            q: DenseQTable::from_model(env, initial),
        }
    }

    pub fn q(&self) -> &DenseQTable {
        &self.q
    }
}

impl<E: Environment + ?Sized> Agent<E> for QLearningAgent {
    fn step(&mut self, env: &E, s: StateId, _alpha: f64) -> Result<StepRecord, AgentError> {
        let (a, _) = self.q.argmin(s);
        let predicted = env.model_step(s, a);
        let next = env.true_step(s, a);
        let cost = env.cost(s, a);
        let tail = if env.is_goal(next) {
            0.0
        } else {
            self.q.argmin(next).1
        };
        let q = cost + tail;
        self.q.set(s, a, q);
        Ok(StepRecord {
            state: s,
            action: a,
            predicted,
            next,
            discrepancy: next != predicted,
            branch: Branch::Qlearning,
            cost,
            value: self.q.argmin(s).1,
            penalized_value: None,
            value_updates: Vec::new(),
            q_write: Some(q),
        })
    }
}
