//! Value-function approximators for large state spaces.
//!
//! Predictions are a fixed base heuristic plus a linear residual over
//! environment-supplied features. The residual starts at zero, so a fresh
//! approximator reproduces the base heuristic exactly. Training minimizes
//! `L = 1/(2|T|) * sum (target - prediction)^2` by plain gradient descent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{ActionId, Problem, StateId};
use crate::store::{QLookup, ValueLookup};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("state {0} is outside the feature map's bounds")]
    OutOfBounds(StateId),
    #[error("training target {0} is not finite and nonnegative")]
    BadTarget(f64),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("polyak coefficient must lie in (0, 1], got {0}")]
    BadTau(f64),
    #[error("parameter shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("output {0} out of range for {1} outputs")]
    BadOutput(usize, usize),
}

/// Maps states to feature vectors and supplies the base heuristic.
pub trait FeatureMap {
    fn dim(&self) -> usize;
    fn num_states(&self) -> usize;
    fn features(&self, s: StateId) -> Vec<f64>;
    fn base_value(&self, s: StateId) -> f64;

    fn checked_features(&self, s: StateId) -> Result<Vec<f64>, ApproxError> {
        if s.index() >= self.num_states() {
            return Err(ApproxError::OutOfBounds(s));
        }
        Ok(self.features(s))
    }
}

/// One indicator feature per state: the tabular special case.
#[derive(Clone, Debug)]
pub struct OneHot {
    base: Vec<f64>,
}

impl OneHot {
    pub fn new(base: Vec<f64>) -> Self {
        Self { base }
    }
}

impl FeatureMap for OneHot {
    fn dim(&self) -> usize {
        self.base.len()
    }
    fn num_states(&self) -> usize {
        self.base.len()
    }
    fn features(&self, s: StateId) -> Vec<f64> {
        let mut phi = vec![0.0; self.base.len()];
        phi[s.index()] = 1.0;
        phi
    }
    fn base_value(&self, s: StateId) -> f64 {
        self.base[s.index()]
    }
}

/// One training pair: features, which output head, base prediction and target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub output: usize,
    pub base: f64,
    pub target: f64,
}

/// Linear residual with `outputs` heads sharing one feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearApproximator {
    dim: usize,
    outputs: usize,
    /// Row-major `outputs x dim`.
    weights: Vec<f64>,
    #[serde(default)]
    weight_decay: f64,
}

impl LinearApproximator {
    pub fn zeros(dim: usize, outputs: usize) -> Self {
        Self {
            dim,
            outputs,
            weights: vec![0.0; dim * outputs],
            weight_decay: 0.0,
        }
    }

    pub fn with_weight_decay(mut self, decay: f64) -> Self {
        self.weight_decay = decay;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.outputs, self.dim)
    }

    pub fn params(&self) -> &[f64] {
        &self.weights
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn residual(&self, phi: &[f64], output: usize) -> f64 {
        let row = &self.weights[output * self.dim..(output + 1) * self.dim];
        row.iter().zip(phi).map(|(w, x)| w * x).sum()
    }

    fn validate(&self, set: &[Sample]) -> Result<(), ApproxError> {
        if set.is_empty() {
            return Err(ApproxError::EmptyTrainingSet);
        }
        for s in set {
            if !s.target.is_finite() || s.target < 0.0 {
                return Err(ApproxError::BadTarget(s.target));
            }
            if s.output >= self.outputs {
                return Err(ApproxError::BadOutput(s.output, self.outputs));
            }
        }
        Ok(())
    }

    /// Mean squared loss, plus `decay/2 * |w|^2` when weight decay is set.
    pub fn loss(&self, set: &[Sample]) -> f64 {
        let n = set.len() as f64;
        let data: f64 = set
            .iter()
            .map(|s| {
                let err = s.target - (s.base + self.residual(&s.features, s.output));
                err * err
            })
            .sum::<f64>()
            / (2.0 * n);
        data + 0.5 * self.weight_decay * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn gradient(&self, set: &[Sample]) -> Vec<f64> {
        let n = set.len() as f64;
        let mut grad: Vec<f64> = self.weights.iter().map(|w| self.weight_decay * w).collect();
        for s in set {
            let err = s.target - (s.base + self.residual(&s.features, s.output));
            let row = &mut grad[s.output * self.dim..(s.output + 1) * self.dim];
            for (g, x) in row.iter_mut().zip(&s.features) {
                *g -= err * x / n;
            }
        }
        grad
    }

    /// One gradient step; returns the loss before the step.
    pub fn fit(&mut self, set: &[Sample], learning_rate: f64) -> Result<f64, ApproxError> {
        if !(learning_rate > 0.0) {
            return Err(ApproxError::BadLearningRate(learning_rate));
        }
        self.validate(set)?;
        let loss = self.loss(set);
        let grad = self.gradient(set);
        for (w, g) in self.weights.iter_mut().zip(grad) {
            *w -= learning_rate * g;
        }
        Ok(loss)
    }
}

/// `tau * online + (1 - tau) * target`, elementwise.
pub fn polyak_update(
    target: &LinearApproximator,
    online: &LinearApproximator,
    tau: f64,
) -> Result<LinearApproximator, ApproxError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(ApproxError::BadTau(tau));
    }
    if target.shape() != online.shape() {
        return Err(ApproxError::ShapeMismatch(target.shape(), online.shape()));
    }
    let mut merged = target.clone();
    for (m, o) in merged.weights.iter_mut().zip(&online.weights) {
        *m = tau * o + (1.0 - tau) * *m;
    }
    Ok(merged)
}

/// `V(s) = base(s) + residual(phi(s))`.
pub struct ValueApprox<'a, F: ?Sized> {
    pub params: &'a LinearApproximator,
    pub features: &'a F,
}

impl<F: FeatureMap + ?Sized> ValueApprox<'_, F> {
    pub fn evaluate(&self, s: StateId) -> Result<f64, ApproxError> {
        let phi = self.features.checked_features(s)?;
        Ok(self.features.base_value(s) + self.params.residual(&phi, 0))
    }

    pub fn sample(&self, s: StateId, target: f64) -> Sample {
        Sample {
            features: self.features.features(s),
            output: 0,
            base: self.features.base_value(s),
            target,
        }
    }
}

impl<F: FeatureMap + ?Sized> ValueLookup for ValueApprox<'_, F> {
    fn value(&self, s: StateId) -> f64 {
        let phi = self.features.features(s);
        (self.features.base_value(s) + self.params.residual(&phi, 0)).max(0.0)
    }
}

/// `Q(s, a) = c(s, a) + base(f̂(s, a)) + residual_a(phi(s))`.
pub struct QApprox<'a, P: ?Sized, F: ?Sized> {
    pub params: &'a LinearApproximator,
    pub features: &'a F,
    pub problem: &'a P,
}

impl<P: Problem + ?Sized, F: FeatureMap + ?Sized> QApprox<'_, P, F> {
    fn base(&self, s: StateId, a: ActionId) -> f64 {
        let next = self.problem.model_step(s, a);
        let h = if self.problem.is_goal(next) {
            0.0
        } else {
            self.features.base_value(next)
        };
        self.problem.cost(s, a) + h
    }

    pub fn evaluate(&self, s: StateId, a: ActionId) -> Result<f64, ApproxError> {
        let phi = self.features.checked_features(s)?;
        Ok(self.base(s, a) + self.params.residual(&phi, a.index()))
    }

    pub fn sample(&self, s: StateId, a: ActionId, target: f64) -> Sample {
        Sample {
            features: self.features.features(s),
            output: a.index(),
            base: self.base(s, a),
            target,
        }
    }
}

impl<P: Problem + ?Sized, F: FeatureMap + ?Sized> QLookup for QApprox<'_, P, F> {
    fn q_value(&self, s: StateId, a: ActionId) -> f64 {
        let phi = self.features.features(s);
        (self.base(s, a) + self.params.residual(&phi, a.index())).max(0.0)
    }
}
