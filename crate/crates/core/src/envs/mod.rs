//! Deterministic environments with controlled model/true-dynamics gaps.

mod grid;
pub mod lattice;
mod lift;
pub mod primitives;

pub use grid::{GridAction, GridNavIce};
pub use lattice::{LatticeParams, LatticeWorld, Patch};
pub use lift::{LiftAction, LiftGrid};
pub use primitives::{MotionPrimitive, PrimitiveParams, PrimitiveTable};

use thiserror::Error;

use crate::problem::{find_dead_end, find_optimism_violation, Environment, StateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("environment has no goal state")]
    NoGoal,
    #[error("no goal is reachable from state {0} under the true dynamics")]
    DeadEnd(StateId),
    #[error("model is not optimistic at state {0}")]
    NotOptimistic(StateId),
    #[error("invalid map: {0}")]
    BadMap(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("no valid instance found after {0} attempts")]
    GenerationFailed(usize),
    #[error("primitive cache: {0}")]
    Cache(String),
}

/// Construction-time checks shared by all environments: a goal exists, every
/// state reaches a goal under the true dynamics, and (when claimed) the model
/// is optimistic everywhere.
pub(crate) fn validate<E: Environment>(env: &E, has_goal: bool) -> Result<(), EnvError> {
    if !has_goal {
        return Err(EnvError::NoGoal);
    }
    if let Some(s) = find_dead_end(env) {
        return Err(EnvError::DeadEnd(s));
    }
    if env.claims_optimistic_model() {
        if let Some(s) = find_optimism_violation(env) {
            return Err(EnvError::NotOptimistic(s));
        }
    }
    Ok(())
}
