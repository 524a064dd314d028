//! Exact stationary analysis of the one-shot collective risk dilemma played
//! in hybrid groups of adaptive social learners and fixed stochastic agents,
//! together with Monte Carlo simulators used to cross-check it.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod markov;
pub mod simulate;
pub mod sweep;
pub mod validation;

pub use dynamics::{PopulationModel, TransitionForm};
pub use error::{CrdError, Result};
pub use game::{GameParams, HybridPolicy, Strategy};
pub use markov::{StationaryDistribution, TransitionMatrix};
