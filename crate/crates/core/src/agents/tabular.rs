//! Tabular CMAX, CMAX++ and A-CMAX++.

use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, Branch, StepRecord};
use crate::incorrect_set::ExactIncorrectSet;
use crate::problem::{ActionId, Environment, NoIncorrect, PenalizedCostView, StateId};
use crate::search::{search, SearchResult};
use crate::store::{QTable, ValueTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Cmax,
    Cmaxpp,
    Acmaxpp,
    Qlearning,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Cmax => "cmax",
            AgentKind::Cmaxpp => "cmaxpp",
            AgentKind::Acmaxpp => "acmaxpp",
            AgentKind::Qlearning => "qlearning",
        }
    }
}

/// Agent state for the small-space algorithms: exact incorrect set and
/// tables for `V`, `Q` and (A-CMAX++ only) the penalized `Ṽ`.
#[derive(Clone, Debug)]
pub struct TabularAgent {
    kind: AgentKind,
    values: ValueTable,
    penalized: Option<ValueTable>,
    q: QTable,
    incorrect: ExactIncorrectSet,
    budget: usize,
    penalty: Option<f64>,
}

impl TabularAgent {
    /// `initial` seeds `V` (and `Ṽ`); goals are forced to zero.
    ///
    /// # Panics
    /// If `kind` is [`AgentKind::Qlearning`], which has its own agent type.
    pub fn new<E: Environment + ?Sized>(
        kind: AgentKind,
        env: &E,
        initial: Vec<f64>,
        budget: usize,
    ) -> Self {
        assert!(kind != AgentKind::Qlearning, "use QLearningAgent");
        let values = ValueTable::from_estimates(env, initial);
        let penalized = (kind == AgentKind::Acmaxpp).then(|| values.clone());
        Self {
            kind,
            values,
            penalized,
            q: QTable::new(),
            incorrect: ExactIncorrectSet::new(),
            budget,
            penalty: None,
        }
    }

    /// Overrides the default penalty of `|S|`.
    pub fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = Some(penalty);
        self
    }

    /// Seeds `Ṽ` separately from `V`. Ignored unless the kind is A-CMAX++.
    pub fn with_penalized_estimates<E: Environment + ?Sized>(
        mut self,
        env: &E,
        initial: Vec<f64>,
    ) -> Self {
        if self.penalized.is_some() {
            self.penalized = Some(ValueTable::from_estimates(env, initial));
        }
        self
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn values(&self) -> &ValueTable {
        &self.values
    }

    pub fn penalized_values(&self) -> Option<&ValueTable> {
        self.penalized.as_ref()
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn incorrect(&self) -> &ExactIncorrectSet {
        &self.incorrect
    }

    fn penalized_search<E: Environment + ?Sized>(
        &self,
        env: &E,
        s: StateId,
        values: &ValueTable,
    ) -> Result<SearchResult, AgentError> {
        let view = match self.penalty {
            Some(p) => PenalizedCostView::with_penalty(env, &self.incorrect, p),
            None => PenalizedCostView::new(env, &self.incorrect),
        };
        Ok(search(
            s,
            &view,
            values,
            &self.q,
            &NoIncorrect,
            self.budget,
        )?)
    }

    /// Runs the kind's searches and applies their value batches. Returns
    /// the action to execute, its source and the batch written into `V`.
    fn plan<E: Environment + ?Sized>(
        &mut self,
        env: &E,
        s: StateId,
        alpha: f64,
    ) -> Result<(ActionId, Branch, Vec<(StateId, f64)>), AgentError> {
        match self.kind {
            AgentKind::Cmax => {
                let r = self.penalized_search(env, s, &self.values)?;
                self.values.apply(&r.value_updates);
                Ok((r.best_action, Branch::Cmax, r.value_updates))
            }
            AgentKind::Cmaxpp => {
                let r = search(s, env, &self.values, &self.q, &self.incorrect, self.budget)?;
                self.values.apply(&r.value_updates);
                Ok((r.best_action, Branch::Cmaxpp, r.value_updates))
            }
            AgentKind::Acmaxpp => {
                let mut tilde = self
                    .penalized
                    .take()
                    .expect("A-CMAX++ keeps a penalized table");
                let penalized = self.penalized_search(env, s, &tilde);
                if let Ok(r) = &penalized {
                    tilde.apply(&r.value_updates);
                }
                let plain = search(s, env, &self.values, &self.q, &self.incorrect, self.budget);
                let batch = match &plain {
                    Ok(r) => {
                        self.values.apply(&r.value_updates);
                        r.value_updates.clone()
                    }
                    Err(_) => Vec::new(),
                };
                let (vt, v) = (tilde.get(s), self.values.get(s));
                self.penalized = Some(tilde);
                // An infinite alpha always trusts the penalized planner, even at V = 0.
                if alpha == f64::INFINITY || vt <= alpha * v {
                    Ok((penalized?.best_action, Branch::Cmax, batch))
                } else {
                    Ok((plain?.best_action, Branch::Cmaxpp, batch))
                }
            }
            AgentKind::Qlearning => unreachable!(),
        }
    }
}

impl<E: Environment + ?Sized> Agent<E> for TabularAgent {
    fn step(&mut self, env: &E, s: StateId, alpha: f64) -> Result<StepRecord, AgentError> {
        let (a, branch, value_updates) = self.plan(env, s, alpha)?;
        let predicted = env.model_step(s, a);
        let next = env.true_step(s, a);
        let cost = env.cost(s, a);
        let discrepancy = next != predicted;
        let mut q_write = None;
        if discrepancy {
            self.incorrect.insert(s, a);
            if self.kind != AgentKind::Cmax {
                let q = cost + self.values.get(next);
                self.q.set(s, a, q);
                q_write = Some(q);
            }
        }
        Ok(StepRecord {
            state: s,
            action: a,
            predicted,
            next,
            discrepancy,
            branch,
            cost,
            value: self.values.get(s),
            penalized_value: self.penalized.as_ref().map(|t| t.get(s)),
            value_updates,
            q_write,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::tests::TableEnv;
    use crate::problem::Problem;

    fn unit_env(model: Vec<Vec<u32>>, truth: Vec<Vec<u32>>, goals: &[u32]) -> TableEnv {
        let costs = vec![vec![1.0; model[0].len()]; model.len()];
        let mut env = TableEnv::new(model, costs, goals);
        env.truth = truth;
        env
    }

    /// s0 -a0-> s1 -a0-> s2 (goal). The model also offers s0 -a1-> s2,
    /// which truly leaves s0 in place.
    fn shortcut_env() -> TableEnv {
        unit_env(
            vec![vec![1, 2], vec![2, 1], vec![2, 2]],
            vec![vec![1, 0], vec![2, 1], vec![2, 2]],
            &[2],
        )
    }

    #[test]
    fn cmaxpp_records_discrepancy_and_writes_q() {
        let env = shortcut_env();
        let mut agent = TabularAgent::new(AgentKind::Cmaxpp, &env, vec![0.0, 5.0, 0.0], 1);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert_eq!(r.action, ActionId(1));
        assert!(r.discrepancy);
        assert_eq!(r.next, StateId(0));
        assert_eq!(agent.incorrect().len(), 1);
        // V(s0) = 1 after the search, so Q(s0, a1) = 1 + 1.
        assert_eq!(r.q_write, Some(2.0));
        assert_eq!(agent.q().get(StateId(0), ActionId(1)), Some(2.0));
        // The dummy keeps winning while its Q stays below V(s1) + 1 = 6,
        // and each re-execution refreshes Q.
        let mut qs = vec![2.0];
        loop {
            let r = agent.step(&env, StateId(0), 1.0).unwrap();
            if r.action == ActionId(0) {
                assert!(!r.discrepancy);
                assert_eq!(r.q_write, None);
                break;
            }
            qs.push(r.q_write.unwrap());
        }
        assert_eq!(qs, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn known_incorrect_pair_refreshes_q_on_reexecution() {
        // In the model only a1 leaves s0, straight to the goal; truly it
        // lands on s1.
        let env = unit_env(
            vec![vec![0, 3], vec![2, 2], vec![3, 3], vec![3, 3]],
            vec![vec![0, 1], vec![2, 2], vec![3, 3], vec![3, 3]],
            &[3],
        );
        let mut agent = TabularAgent::new(AgentKind::Cmaxpp, &env, vec![0.0, 7.0, 0.0, 0.0], 1);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert_eq!(r.q_write, Some(8.0));
        agent.values.set(StateId(1), 9.0);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert_eq!(r.action, ActionId(1));
        assert_eq!(r.q_write, Some(10.0));
    }

    #[test]
    fn matching_outcome_changes_only_values() {
        let env = TableEnv::chain();
        let mut agent = TabularAgent::new(AgentKind::Cmaxpp, &env, vec![0.0; 3], 2);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert!(!r.discrepancy);
        assert!(agent.incorrect().is_empty() && agent.q().is_empty());
        assert_eq!(agent.values().get(StateId(0)), 2.0);
        assert_eq!(agent.values().get(StateId(1)), 1.0);
    }

    #[test]
    fn cmax_penalizes_without_q() {
        let env = shortcut_env();
        let mut agent = TabularAgent::new(AgentKind::Cmax, &env, vec![0.0, 5.0, 0.0], 1);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert!(r.discrepancy);
        assert_eq!(r.q_write, None);
        assert!(agent.q().is_empty());
        // The shortcut now costs |S| = 3 against 1 + 5 for walking; with a
        // larger penalty the agent walks.
        let mut agent = agent.with_penalty(400.0);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert_eq!(r.action, ActionId(0));
        assert_eq!(r.branch, Branch::Cmax);
    }

    #[test]
    fn cmax_with_empty_set_matches_plain_search() {
        let env = TableEnv::chain();
        let mut agent = TabularAgent::new(AgentKind::Cmax, &env, vec![0.0; 3], 2);
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        let plain = search(
            StateId(0),
            &env,
            &ValueTable::zeros(3),
            &QTable::new(),
            &NoIncorrect,
            2,
        )
        .unwrap();
        assert_eq!(r.action, plain.best_action);
        assert_eq!(r.value_updates, plain.value_updates);
    }

    /// s0 reaches the goal s3 through s1 or s2; both exits of each are
    /// modeled correctly only for s1's a0.
    fn bottleneck() -> TableEnv {
        unit_env(
            vec![vec![1, 2], vec![3, 3], vec![3, 3], vec![3, 3]],
            vec![vec![1, 2], vec![3, 3], vec![2, 3], vec![3, 3]],
            &[3],
        )
    }

    #[test]
    fn cmax_still_acts_when_every_route_is_penalized() {
        let env = bottleneck();
        let mut agent =
            TabularAgent::new(AgentKind::Cmax, &env, vec![0.0; 4], 4).with_penalty(400.0);
        for s in [1, 2] {
            for a in [0, 1] {
                agent.incorrect.insert(StateId(s), ActionId(a));
            }
        }
        let r = agent.step(&env, StateId(0), 1.0).unwrap();
        assert!(r.value >= 400.0);
        assert!(r.value.is_finite());
    }

    #[test]
    fn acmaxpp_switch_condition() {
        let env = TableEnv::chain();
        let run = |alpha: f64| {
            let mut agent = TabularAgent::new(AgentKind::Acmaxpp, &env, vec![0.0; 3], 1);
            agent.penalized = Some(ValueTable::from_estimates(&env, vec![10.0, 9.0, 0.0]));
            agent.values = ValueTable::from_estimates(&env, vec![4.0, 3.0, 0.0]);
            agent.step(&env, StateId(0), alpha).unwrap()
        };
        let r = run(3.0);
        assert_eq!((r.penalized_value, r.value), (Some(10.0), 4.0));
        assert_eq!(r.branch, Branch::Cmax);
        assert_eq!(run(2.0).branch, Branch::Cmaxpp);
    }

    #[test]
    fn acmaxpp_infinite_alpha_is_cmax() {
        let env = bottleneck();
        let mut a = TabularAgent::new(AgentKind::Acmaxpp, &env, vec![0.0; 4], 2);
        let mut b = TabularAgent::new(AgentKind::Cmax, &env, vec![0.0; 4], 2);
        let mut s = env.start();
        while !env.is_goal(s) {
            let ra = a.step(&env, s, f64::INFINITY).unwrap();
            let rb = b.step(&env, s, f64::INFINITY).unwrap();
            assert_eq!(ra.action, rb.action);
            assert_eq!(ra.next, rb.next);
            assert_eq!(ra.branch, Branch::Cmax);
            s = ra.next;
        }
    }

    #[test]
    fn acmaxpp_discrepancy_uses_plain_values() {
        let env = shortcut_env();
        let mut agent = TabularAgent::new(AgentKind::Acmaxpp, &env, vec![0.0, 5.0, 0.0], 1);
        let r = agent.step(&env, StateId(0), f64::INFINITY).unwrap();
        assert!(r.discrepancy);
        assert_eq!(r.q_write, Some(1.0 + agent.values().get(StateId(0))));
    }

    #[test]
    #[should_panic]
    fn qlearning_kind_is_rejected() {
        let env = TableEnv::chain();
        TabularAgent::new(AgentKind::Qlearning, &env, vec![0.0; 3], 1);
    }
}
