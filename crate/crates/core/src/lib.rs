//! Active evaluation of agents across tasks: ranking metrics, world
//! generators, voting rules, game solvers, rating systems, evaluators and an
//! experiment harness.

pub mod datagen;
pub mod error;
pub mod evaluators;
pub mod games;
pub mod harness;
pub mod rankings;
pub mod ratings;
pub mod rng;
pub mod voting;

pub use error::{Error, Result};
pub use rankings::{AgentId, Ranking};
