//! Measuring and mitigating dormant neurons in value-based deep RL.
//!
//! The crate bundles a small dense network stack ([`nn`]), deterministic
//! environments and supervised tasks ([`envs`]), a DQN training loop with
//! replay-ratio control ([`agent`]), neuron dormancy scoring ([`dormancy`]),
//! neuron recycling and its baselines ([`recycle`]), aggregate statistics
//! ([`metrics`]) and declarative experiment recipes ([`experiments`]).
//!
//! Runnable walkthroughs for each capability live in `examples/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod cli;
pub mod dormancy;
pub mod envs;
mod error;
pub mod experiments;
pub mod metrics;
pub mod nn;
pub mod recycle;
pub mod rng;

pub use error::{Error, Result};
