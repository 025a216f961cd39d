//! Repetition and task loops. Agent state carries over between
//! repetitions; nothing is reset.

use serde::{Deserialize, Serialize};

use super::{Agent, AlphaSchedule, Branch, StepRecord};
use crate::problem::{ActionId, Environment, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrepancyEvent {
    /// Step index within the repetition.
    pub t: usize,
    pub state: StateId,
    pub action: ActionId,
    pub predicted: StateId,
    pub actual: StateId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    /// Numbered from 1.
    pub index: usize,
    pub steps: usize,
    pub cost: f64,
    pub success: bool,
    pub alpha: f64,
    pub events: Vec<DiscrepancyEvent>,
    /// Which planner chose each executed action.
    pub branches: Vec<Branch>,
    /// Set when planning failed and ended the repetition early.
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskOptions {
    pub repetitions: usize,
    pub step_cap: usize,
    /// Keep going after a failed repetition instead of aborting the task.
    pub continue_after_failure: bool,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self {
            repetitions: 20,
            step_cap: 500,
            continue_after_failure: false,
        }
    }
}

pub fn run_repetition<E, A>(
    agent: &mut A,
    env: &E,
    index: usize,
    alpha: f64,
    step_cap: usize,
) -> RepetitionRecord
where
    E: Environment + ?Sized,
    A: Agent<E> + ?Sized,
{
    run_repetition_with(agent, env, index, alpha, step_cap, |_| {})
}

/// Like [`run_repetition`], calling `observe` after every step.
pub fn run_repetition_with<E, A, F>(
    agent: &mut A,
    env: &E,
    index: usize,
    alpha: f64,
    step_cap: usize,
    mut observe: F,
) -> RepetitionRecord
where
    E: Environment + ?Sized,
    A: Agent<E> + ?Sized,
    F: FnMut(&StepRecord),
{
    assert!(step_cap >= 1, "step cap must be positive");
    let mut record = RepetitionRecord {
        index,
        steps: 0,
        cost: 0.0,
        success: false,
        alpha,
        events: Vec::new(),
        branches: Vec::new(),
        error: None,
    };
    let mut s = env.start();
    while !env.is_goal(s) {
        if record.steps >= step_cap {
            return record;
        }
        let step = match agent.step(env, s, alpha) {
            Ok(step) => step,
            Err(e) => {
                log::warn!("repetition {index} stopped at step {}: {e}", record.steps);
                record.error = Some(e.to_string());
                return record;
            }
        };
        if step.discrepancy {
            record.events.push(DiscrepancyEvent {
                t: record.steps,
                state: step.state,
                action: step.action,
                predicted: step.predicted,
                actual: step.next,
            });
        }
        record.branches.push(step.branch);
        record.cost += step.cost;
        record.steps += 1;
        s = step.next;
        observe(&step);
    }
    record.success = true;
    record
}

/// Runs up to `options.repetitions` repetitions with `alpha_i` drawn from
/// `schedule`, stopping after the first failure unless told otherwise.
pub fn run_task<E, A>(
    agent: &mut A,
    env: &E,
    options: &TaskOptions,
    schedule: &AlphaSchedule,
) -> Vec<RepetitionRecord>
where
    E: Environment + ?Sized,
    A: Agent<E> + ?Sized,
{
    run_task_with(agent, env, options, schedule, |_, _| {})
}

/// Like [`run_task`], calling `observe(repetition, step)` after every step.
pub fn run_task_with<E, A, F>(
    agent: &mut A,
    env: &E,
    options: &TaskOptions,
    schedule: &AlphaSchedule,
    mut observe: F,
) -> Vec<RepetitionRecord>
where
    E: Environment + ?Sized,
    A: Agent<E> + ?Sized,
    F: FnMut(usize, &StepRecord),
{
    assert!(options.repetitions >= 1, "at least one repetition");
    let mut records = Vec::with_capacity(options.repetitions);
    for i in 1..=options.repetitions {
        let alpha = schedule.alpha(i);
        let r = run_repetition_with(agent, env, i, alpha, options.step_cap, |s| observe(i, s));
        let failed = !r.success;
        records.push(r);
        if failed && !options.continue_after_failure {
            break;
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentKind, TabularAgent};
    use crate::problem::tests::TableEnv;

    /// s0 -> s1 -> g is blocked at s0 in truth; s0 -> s2 -> s1 -> g is the
    /// true optimum at cost 3.
    fn detour() -> TableEnv {
        let mut env = TableEnv::new(
            vec![vec![1, 2], vec![3, 1], vec![1, 2], vec![3, 3]],
            vec![vec![1.0, 1.0]; 4],
            &[3],
        );
        env.truth[0][0] = 0;
        env
    }

    fn always() -> AlphaSchedule {
        AlphaSchedule::constant(1.0)
    }

    #[test]
    fn start_in_goal_is_an_empty_success() {
        let mut env = TableEnv::chain();
        env.start = 2;
        let mut agent = TabularAgent::new(AgentKind::Cmaxpp, &env, vec![0.0; 3], 1);
        let r = run_repetition(&mut agent, &env, 1, 1.0, 10);
        assert!(r.success);
        assert_eq!((r.steps, r.cost), (0, 0.0));
    }

    #[test]
    fn failure_aborts_the_task_unless_continuing() {
        // The goal is unreachable: every true transition stays put.
        let mut env = TableEnv::chain();
        env.truth = vec![vec![0, 0], vec![1, 1], vec![2, 2]];
        let opts = TaskOptions {
            repetitions: 4,
            step_cap: 5,
            continue_after_failure: false,
        };
        let mut agent = TabularAgent::new(AgentKind::Cmax, &env, vec![0.0; 3], 1);
        let rs = run_task(&mut agent, &env, &opts, &always());
        assert_eq!(rs.len(), 1);
        assert!(!rs[0].success);
        assert_eq!(rs[0].steps, 5);
        let opts = TaskOptions {
            continue_after_failure: true,
            ..opts
        };
        let rs = run_task(&mut agent, &env, &opts, &always());
        assert_eq!(rs.len(), 4);
        assert!(rs.iter().all(|r| r.steps <= 5));
    }

    #[test]
    fn events_are_logged() {
        let env = detour();
        let mut agent = TabularAgent::new(AgentKind::Cmaxpp, &env, vec![0.0; 4], 1);
        let r = run_repetition(&mut agent, &env, 1, 1.0, 50);
        assert!(r.success);
        assert_eq!(r.events[0].t, 0);
        assert_eq!(r.events[0].actual, StateId(0));
        assert_eq!(r.branches.len(), r.steps);
    }

    #[test]
    fn converged_agent_follows_the_optimal_path() {
        let env = detour();
        let opts = TaskOptions {
            repetitions: 10,
            step_cap: 100,
            continue_after_failure: false,
        };
        let mut agent = TabularAgent::new(AgentKind::Cmaxpp, &env, vec![0.0; 4], 1);
        let rs = run_task(&mut agent, &env, &opts, &always());
        assert_eq!(rs.len(), 10);
        assert_eq!(rs.last().unwrap().steps, 3);
        assert_eq!(rs.last().unwrap().cost, 3.0);
    }
}
