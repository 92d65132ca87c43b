//! Simulation engine and mechanism library for repeated delegated choice.
//!
//! A principal announces an eligible set each round, an agent who sees the
//! round's solutions proposes at most one, and the principal accepts it iff it
//! is eligible. The crate provides the principal's mechanisms, agent models,
//! the threshold benchmark, and a deterministic, parallel experiment runner.

pub mod agents;
pub mod benchmark;
pub mod domain;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod mechanisms;
pub mod rppm;
pub mod verify;

pub use error::{Error, Result};
