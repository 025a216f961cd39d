//! Planning and execution with inaccurate deterministic models.
//!
//! A bounded-lookahead search that mixes model-based expansion with learned
//! Q-values on transitions known to be wrongly modeled, the agents built on
//! it, and environments whose true dynamics differ from the planning model.

pub mod agents;
pub mod approx;
pub mod envs;
pub mod incorrect_set;
mod kdtree;
pub mod problem;
pub mod search;
pub mod store;

pub use problem::{ActionId, Environment, Problem, StateId};
