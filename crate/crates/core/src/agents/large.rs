//! CMAX++ for large state spaces: hypersphere incorrect sets, linear
//! residual approximators for `V` and `Q`, and replay-buffer updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, Branch, StepRecord};
use crate::approx::{polyak_update, FeatureMap, LinearApproximator, QApprox, Sample, ValueApprox};
use crate::incorrect_set::{HypersphereSet, Metric};
use crate::problem::{is_discrepant, ActionId, Environment, IncorrectLookup, Problem, StateId};
use crate::search::{search, SearchError};
use crate::store::ValueLookup;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LargeConfig {
    pub budget: usize,
    /// Discrepancy threshold.
    pub xi: f64,
    /// Hypersphere radius.
    pub delta: f64,
    pub metric: Metric,
    pub batch: usize,
    pub learning_rate: f64,
    pub v_updates: usize,
    pub q_updates: usize,
    /// Polyak coefficient for the target copies.
    pub tau: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for LargeConfig {
    fn default() -> Self {
        Self {
            budget: 5,
            xi: 0.0,
            delta: 3.0,
            metric: Metric::Manhattan,
            batch: 16,
            learning_rate: 0.001,
            v_updates: 3,
            q_updates: 5,
            tau: 0.5,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateId,
    pub action: ActionId,
    pub next: StateId,
}

fn value_of<E>(v: &LinearApproximator, env: &E, s: StateId) -> f64
where
    E: Problem + FeatureMap + ?Sized,
{
    if env.is_goal(s) {
        0.0
    } else {
        ValueApprox {
            params: v,
            features: env,
        }
        .value(s)
    }
}

/// Q_UPDATE: one gradient step on `B` transitions sampled with
/// replacement, with targets `c(s, a) + V(s')`. Returns the pre-step loss.
#[allow(clippy::too_many_arguments)]
pub fn q_update<E, R>(
    q: &mut LinearApproximator,
    v: &LinearApproximator,
    env: &E,
    buffer: &[Transition],
    batch: usize,
    learning_rate: f64,
    rng: &mut R,
) -> Result<f64, AgentError>
where
    E: Problem + FeatureMap + ?Sized,
    R: Rng + ?Sized,
{
    if buffer.is_empty() || batch == 0 {
        log::warn!("q_update skipped: empty transition buffer");
        return Ok(0.0);
    }
    let samples: Vec<Sample> = (0..batch)
        .map(|_| {
            let t = buffer[rng.gen_range(0..buffer.len())];
            let target = env.cost(t.state, t.action) + value_of(v, env, t.next);
            QApprox {
                params: &*q,
                features: env,
                problem: env,
            }
            .sample(t.state, t.action, target)
        })
        .collect();
    Ok(q.fit(&samples, learning_rate)?)
}

/// Value targets harvested from one search per sampled state: every
/// closed state paired with `p_best - g`. Goal states are skipped.
#[allow(clippy::too_many_arguments)]
pub fn v_training_set<E, X, R>(
    v: &LinearApproximator,
    q: &LinearApproximator,
    env: &E,
    incorrect: &X,
    buffer: &[StateId],
    batch: usize,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<(StateId, f64)>, SearchError>
where
    E: Problem + FeatureMap + ?Sized,
    X: IncorrectLookup + ?Sized,
    R: Rng + ?Sized,
{
    let values = ValueApprox {
        params: v,
        features: env,
    };
    let qs = QApprox {
        params: q,
        features: env,
        problem: env,
    };
    let mut out = Vec::new();
    if buffer.is_empty() {
        return Ok(out);
    }
    for _ in 0..batch {
        let s = buffer[rng.gen_range(0..buffer.len())];
        if env.is_goal(s) {
            continue;
        }
        let r = search(s, env, &values, &qs, incorrect, budget)?;
        out.extend(r.value_updates);
    }
    Ok(out)
}

/// V_UPDATE: one gradient step on the harvested value targets. Searches
/// read `v_read` and `q`; the step is taken on `v`.
#[allow(clippy::too_many_arguments)]
pub fn v_update<E, X, R>(
    v: &mut LinearApproximator,
    v_read: &LinearApproximator,
    q: &LinearApproximator,
    env: &E,
    incorrect: &X,
    buffer: &[StateId],
    batch: usize,
    learning_rate: f64,
    budget: usize,
    rng: &mut R,
) -> Result<f64, AgentError>
where
    E: Problem + FeatureMap + ?Sized,
    X: IncorrectLookup + ?Sized,
    R: Rng + ?Sized,
{
    let targets = v_training_set(v_read, q, env, incorrect, buffer, batch, budget, rng)?;
    if targets.is_empty() {
        if buffer.is_empty() {
            log::warn!("v_update skipped: empty state buffer");
        }
        return Ok(0.0);
    }
    let approx = ValueApprox {
        params: &*v,
        features: env,
    };
    let samples: Vec<Sample> = targets
        .iter()
        .map(|&(s, target)| approx.sample(s, target))
        .collect();
    Ok(v.fit(&samples, learning_rate)?)
}

/// Online and target approximators, hyperspheres and replay buffers.
#[derive(Clone, Debug)]
pub struct LargeAgent {
    config: LargeConfig,
    v: LinearApproximator,
    v_target: LinearApproximator,
    q: LinearApproximator,
    q_target: LinearApproximator,
    spheres: HypersphereSet,
    states: Vec<StateId>,
    transitions: Vec<Transition>,
    rng: ChaCha8Rng,
    last_losses: (f64, f64),
}

impl LargeAgent {
    pub fn new<E>(env: &E, config: LargeConfig) -> Self
    where
        E: Environment + FeatureMap + ?Sized,
    {
        let dim = FeatureMap::dim(env);
        let coords = env.coordinates(env.start()).len();
        let v = LinearApproximator::zeros(dim, 1).with_weight_decay(config.weight_decay);
        let q = LinearApproximator::zeros(dim, env.num_actions())
            .with_weight_decay(config.weight_decay);
        Self {
            spheres: HypersphereSet::new(env.num_actions(), coords, config.metric),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            v_target: v.clone(),
            q_target: q.clone(),
            v,
            q,
            config,
            states: Vec::new(),
            transitions: Vec::new(),
            last_losses: (0.0, 0.0),
        }
    }

    pub fn values(&self) -> &LinearApproximator {
        &self.v
    }

    pub fn q(&self) -> &LinearApproximator {
        &self.q
    }

    pub fn spheres(&self) -> &HypersphereSet {
        &self.spheres
    }

    /// Latest `(L_V, L_Q)` pre-step losses.
    pub fn last_losses(&self) -> (f64, f64) {
        self.last_losses
    }

    fn train<E>(&mut self, env: &E) -> Result<(), AgentError>
    where
        E: Environment + FeatureMap + ?Sized,
    {
        let c = &self.config;
        let rounds = c.v_updates.max(c.q_updates);
        for u in 0..rounds {
            if u < c.q_updates {
                self.last_losses.1 = q_update(
                    &mut self.q,
                    &self.v_target,
                    env,
                    &self.transitions,
                    c.batch,
                    c.learning_rate,
                    &mut self.rng,
                )?;
            }
            if u < c.v_updates {
                let lookup = self.spheres.lookup(env);
                self.last_losses.0 = v_update(
                    &mut self.v,
                    &self.v_target,
                    &self.q_target,
                    env,
                    &lookup,
                    &self.states,
                    c.batch,
                    c.learning_rate,
                    c.budget,
                    &mut self.rng,
                )?;
            }
            self.v_target = polyak_update(&self.v_target, &self.v, c.tau)?;
            self.q_target = polyak_update(&self.q_target, &self.q, c.tau)?;
        }
        Ok(())
    }
}

impl<E> Agent<E> for LargeAgent
where
    E: Environment + FeatureMap + ?Sized,
{
    fn step(&mut self, env: &E, s: StateId, _alpha: f64) -> Result<StepRecord, AgentError> {
        let result = {
            let values = ValueApprox {
                params: &self.v,
                features: env,
            };
            let qs = QApprox {
                params: &self.q,
                features: env,
                problem: env,
            };
            let lookup = self.spheres.lookup(env);
            search(s, env, &values, &qs, &lookup, self.config.budget)?
        };
        let a = result.best_action;
        let predicted = env.model_step(s, a);
        let next = env.true_step(s, a);
        let discrepancy = is_discrepant(env, next, predicted, self.config.xi);
        if discrepancy {
            self.spheres
                .insert(env.coordinates(s), a, self.config.delta);
        }
        self.states.push(s);
        self.transitions.push(Transition {
            state: s,
            action: a,
            next,
        });
        self.train(env)?;
        Ok(StepRecord {
            state: s,
            action: a,
            predicted,
            next,
            discrepancy,
            branch: Branch::Cmaxpp,
            cost: env.cost(s, a),
            value: value_of(&self.v, env, s),
            penalized_value: None,
            value_updates: Vec::new(),
            q_write: None,
        })
    }
}
