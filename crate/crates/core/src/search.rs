//! Hybrid limited-expansion search.
//!
//! A bounded best-first lookahead over the model that prices known-incorrect
//! transitions with model-free Q-values instead of expanding them. After the
//! lookahead every expanded state receives the RTAA*-style update
//! `V(s') = p(best) - g(s')`, returned as a batch for the caller to apply.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use log::trace;
use thiserror::Error;

use crate::problem::{ActionId, IncorrectLookup, Problem, StateId};
use crate::store::{QLookup, ValueLookup};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search started from goal state {0}")]
    RootIsGoal(StateId),
    #[error("expansion budget must be at least 1")]
    ZeroBudget,
    #[error("no goal or incorrect transition reachable from {0} under the model")]
    Unsolvable(StateId),
}

/// Why the search stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Goal,
    Dummy,
    Budget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub best_action: ActionId,
    pub best_priority: f64,
    /// `(state, p(best) - g(state))` for every expanded state, in expansion order.
    pub value_updates: Vec<(StateId, f64)>,
    pub expansions_used: usize,
    pub terminated_on: Termination,
}

#[derive(Clone, Debug)]
struct Node {
    /// `None` for dummy leaves standing in for an unknown true successor.
    state: Option<StateId>,
    g: f64,
    priority: f64,
    parent: Option<u32>,
    action: Option<ActionId>,
    seq: u64,
    closed: bool,
}

#[derive(Clone, Copy, Debug)]
struct OpenEntry {
    priority: f64,
    g: f64,
    seq: u64,
    node: u32,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // Max-heap order: lower priority first, then deeper (larger g), then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Frontier {
    nodes: Vec<Node>,
    heap: BinaryHeap<OpenEntry>,
    by_state: HashMap<StateId, u32>,
    next_seq: u64,
}

impl Frontier {
    fn new() -> Self {
        Self {
            nodes: Vec::new(),
            heap: BinaryHeap::new(),
            by_state: HashMap::new(),
            next_seq: 0,
        }
    }

    fn push_node(&mut self, mut node: Node) -> u32 {
        node.seq = self.next_seq;
        self.next_seq += 1;
        let idx = self.nodes.len() as u32;
        self.heap.push(OpenEntry {
            priority: node.priority,
            g: node.g,
            seq: node.seq,
            node: idx,
        });
        if let Some(s) = node.state {
            self.by_state.insert(s, idx);
        }
        self.nodes.push(node);
        idx
    }

    fn improve(&mut self, idx: u32, g: f64, priority: f64, parent: u32, action: ActionId) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let node = &mut self.nodes[idx as usize];
        node.g = g;
        node.priority = priority;
        node.parent = Some(parent);
        node.action = Some(action);
        node.seq = seq;
        self.heap.push(OpenEntry {
            priority,
            g,
            seq,
            node: idx,
        });
    }

    /// Pops the best live entry, skipping entries superseded by a g-improvement.
    fn pop(&mut self) -> Option<u32> {
        while let Some(entry) = self.heap.pop() {
            let node = &self.nodes[entry.node as usize];
            if node.seq == entry.seq && !node.closed {
                return Some(entry.node);
            }
        }
        None
    }

    fn first_action(&self, mut idx: u32) -> Option<ActionId> {
        let mut action = None;
        while let Some(parent) = self.nodes[idx as usize].parent {
            action = self.nodes[idx as usize].action;
            idx = parent;
        }
        action
    }
}

/// Runs one bounded lookahead from `root`.
///
/// Pairs in `incorrect` spawn dummy leaves priced `g(s) + Q(s, a)`; all other
/// actions are expanded through `problem.model_step`. Popping a goal or a dummy
/// ends the search immediately; otherwise the best open node after `budget`
/// expansions is used.
pub fn search<P, V, Q, X>(
    root: StateId,
    problem: &P,
    values: &V,
    q: &Q,
    incorrect: &X,
    budget: usize,
) -> Result<SearchResult, SearchError>
where
    P: Problem + ?Sized,
    V: ValueLookup + ?Sized,
    Q: QLookup + ?Sized,
    X: IncorrectLookup + ?Sized,
{
    if budget == 0 {
        return Err(SearchError::ZeroBudget);
    }
    if problem.is_goal(root) {
        return Err(SearchError::RootIsGoal(root));
    }

    let mut frontier = Frontier::new();
    let mut closed: Vec<u32> = Vec::new();
    frontier.push_node(Node {
        state: Some(root),
        g: 0.0,
        priority: values.value(root),
        parent: None,
        action: None,
        seq: 0,
        closed: false,
    });

    let mut terminal = None;
    for _ in 0..budget {
        let idx = frontier.pop().ok_or(SearchError::Unsolvable(root))?;
        let (state, g) = {
            let node = &frontier.nodes[idx as usize];
            (node.state, node.g)
        };
        let Some(s) = state else {
            terminal = Some((idx, Termination::Dummy));
            break;
        };
        if problem.is_goal(s) {
            terminal = Some((idx, Termination::Goal));
            break;
        }
        // Closed before its successors are generated so self-loops are skipped.
        frontier.nodes[idx as usize].closed = true;
        closed.push(idx);
        trace!(
            "expand state={} g={} p={}",
            s,
            g,
            frontier.nodes[idx as usize].priority
        );

        for a in problem.actions() {
            if incorrect.contains(s, a) {
                frontier.push_node(Node {
                    state: None,
                    g,
                    priority: g + q.q_value(s, a),
                    parent: Some(idx),
                    action: Some(a),
                    seq: 0,
                    closed: false,
                });
                continue;
            }
            let next = problem.model_step(s, a);
            let next_g = g + problem.cost(s, a);
            match frontier.by_state.entry(next) {
                Entry::Occupied(e) => {
                    let existing = *e.get();
                    let node = &frontier.nodes[existing as usize];
                    if node.closed || node.g <= next_g {
                        continue;
                    }
                    let h = if problem.is_goal(next) {
                        0.0
                    } else {
                        values.value(next)
                    };
                    frontier.improve(existing, next_g, next_g + h, idx, a);
                }
                Entry::Vacant(_) => {
                    let h = if problem.is_goal(next) {
                        0.0
                    } else {
                        values.value(next)
                    };
                    frontier.push_node(Node {
                        state: Some(next),
                        g: next_g,
                        priority: next_g + h,
                        parent: Some(idx),
                        action: Some(a),
                        seq: 0,
                        closed: false,
                    });
                }
            }
        }
    }

    let (best, terminated_on) = match terminal {
        Some(t) => t,
        None => (
            frontier.pop().ok_or(SearchError::Unsolvable(root))?,
            Termination::Budget,
        ),
    };
    let best_priority = frontier.nodes[best as usize].priority;
    let best_action = frontier
        .first_action(best)
        .expect("best node is never the root");

    let value_updates = closed
        .iter()
        .map(|&i| {
            let node = &frontier.nodes[i as usize];
            (
                node.state.expect("dummies are never closed"),
                best_priority - node.g,
            )
        })
        .collect();
    trace!(
        "search root={} best_action={} p_best={} expansions={} end={:?}",
        root,
        best_action,
        best_priority,
        closed.len(),
        terminated_on
    );

    Ok(SearchResult {
        best_action,
        best_priority,
        value_updates,
        expansions_used: closed.len(),
        terminated_on,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::tests::TableEnv;
    use crate::problem::NoIncorrect;
    use crate::store::{QTable, ValueTable};
    use std::collections::HashSet;

    struct Pairs(HashSet<(StateId, ActionId)>);

    impl IncorrectLookup for Pairs {
        fn contains(&self, s: StateId, a: ActionId) -> bool {
            self.0.contains(&(s, a))
        }
    }

    #[test]
    fn chain_lookahead_two() {
        let env = TableEnv::chain();
        let v = ValueTable::zeros(3);
        let r = search(StateId(0), &env, &v, &QTable::new(), &NoIncorrect, 2).unwrap();
        assert_eq!(r.best_action, ActionId(0));
        assert_eq!(r.best_priority, 2.0);
        assert_eq!(r.value_updates, vec![(StateId(0), 2.0), (StateId(1), 1.0)]);
        assert_eq!(r.expansions_used, 2);
        assert_eq!(r.terminated_on, Termination::Budget);
    }

    #[test]
    fn dummy_beats_expensive_successor() {
        // s0: action 0 is incorrect with Q = 5, action 1 reaches s1 at cost 1, V(s1) = 10.
        let env = TableEnv::new(
            vec![vec![0, 1], vec![2, 2], vec![2, 2]],
            vec![vec![1.0, 1.0]; 3],
            &[2],
        );
        let v = ValueTable::from_estimates(&env, vec![0.0, 10.0, 0.0]);
        let mut q = QTable::new();
        q.set(StateId(0), ActionId(0), 5.0);
        let x = Pairs([(StateId(0), ActionId(0))].into_iter().collect());
        let r = search(StateId(0), &env, &v, &q, &x, 1).unwrap();
        assert_eq!(r.best_action, ActionId(0));
        assert_eq!(r.best_priority, 5.0);
        assert_eq!(r.value_updates, vec![(StateId(0), 5.0)]);
    }

    #[test]
    fn popping_a_dummy_ends_the_search() {
        let env = TableEnv::new(
            vec![vec![0, 1], vec![2, 2], vec![2, 2]],
            vec![vec![1.0, 1.0]; 3],
            &[2],
        );
        let v = ValueTable::from_estimates(&env, vec![0.0, 10.0, 0.0]);
        let mut q = QTable::new();
        q.set(StateId(0), ActionId(0), 5.0);
        let x = Pairs([(StateId(0), ActionId(0))].into_iter().collect());
        let r = search(StateId(0), &env, &v, &q, &x, 10).unwrap();
        assert_eq!(r.terminated_on, Termination::Dummy);
        assert_eq!(r.expansions_used, 1);
        assert_eq!(r.best_action, ActionId(0));
    }

    #[test]
    fn immediate_goal() {
        let env = TableEnv::new(vec![vec![1], vec![1]], vec![vec![0.5]; 2], &[1]);
        let v = ValueTable::zeros(2);
        let r = search(StateId(0), &env, &v, &QTable::new(), &NoIncorrect, 5).unwrap();
        assert_eq!(r.terminated_on, Termination::Goal);
        assert_eq!(r.best_action, ActionId(0));
        assert_eq!(r.best_priority, 0.5);
        assert!(r.expansions_used < 5);
    }

    #[test]
    fn root_goal_is_rejected() {
        let env = TableEnv::chain();
        let v = ValueTable::zeros(3);
        let err = search(StateId(2), &env, &v, &QTable::new(), &NoIncorrect, 3).unwrap_err();
        assert_eq!(err, SearchError::RootIsGoal(StateId(2)));
        let err = search(StateId(0), &env, &v, &QTable::new(), &NoIncorrect, 0).unwrap_err();
        assert_eq!(err, SearchError::ZeroBudget);
    }

    #[test]
    fn isolated_component_is_unsolvable() {
        // s0 <-> s1 forever; goal s2 unreachable under the model.
        let env = TableEnv::new(
            vec![vec![1, 0], vec![0, 1], vec![2, 2]],
            vec![vec![1.0, 1.0]; 3],
            &[2],
        );
        let v = ValueTable::zeros(3);
        let err = search(StateId(0), &env, &v, &QTable::new(), &NoIncorrect, 10).unwrap_err();
        assert_eq!(err, SearchError::Unsolvable(StateId(0)));
    }

    #[test]
    fn open_list_improvement_rewires_parent() {
        // s0 -a0-> s1 (cost 1) -a0-> s3 (cost 1)
        // s0 -a1-> s3 directly (cost 0.9).
        // s0 -a2-> s2 (cost 0.1) -a0-> s3 (cost 0.1)
        let env = TableEnv::new(
            vec![vec![1, 3, 2], vec![3, 1, 1], vec![3, 2, 2], vec![3, 3, 3]],
            vec![
                vec![1.0, 0.9, 0.1],
                vec![1.0, 1.0, 1.0],
                vec![0.1, 1.0, 1.0],
                vec![1.0, 1.0, 1.0],
            ],
            &[3],
        );
        let v = ValueTable::from_estimates(&env, vec![0.0, 5.0, 0.0, 0.0]);
        let r = search(StateId(0), &env, &v, &QTable::new(), &NoIncorrect, 10).unwrap();
        assert_eq!(r.terminated_on, Termination::Goal);
        assert!((r.best_priority - 0.2).abs() < 1e-12);
        assert_eq!(r.best_action, ActionId(2));
    }
}
