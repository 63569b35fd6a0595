//! Deterministic environments and supervised task generators.
//!
//! Environment transitions are pure functions of `(spec, seed, actions)`:
//! states are plain values and [`EnvState::step`] returns the next one.

mod cartpole;
mod catch;
mod supervised;

use serde::{Deserialize, Serialize};

pub use cartpole::{CartPoleState, PUSH_LEFT, PUSH_RIGHT};
pub use catch::{CatchState, CATCH_LEFT, CATCH_RIGHT, CATCH_STAY};
pub use supervised::{
    load_classification_csv, make_classification_task, shuffle_labels, RegressionTask,
    SupervisedTask, DEFAULT_CLUSTER_NOISE,
};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EnvSpec {
    Catch {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_cols")]
        cols: usize,
    },
    Cartpole {
        #[serde(default = "default_cap")]
        episode_cap: usize,
    },
}

fn default_rows() -> usize {
    10
}
fn default_cols() -> usize {
    5
}
fn default_cap() -> usize {
    200
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec::catch()
    }
}

impl EnvSpec {
    pub fn catch() -> Self {
        EnvSpec::Catch { rows: 10, cols: 5 }
    }

    pub fn cartpole() -> Self {
        EnvSpec::Cartpole { episode_cap: 200 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvSpec::Catch { rows, cols } if rows < 2 || cols < 2 => Err(Error::Config(format!(
                "catch grid must be at least 2x2, got {rows}x{cols}"
            ))),
            EnvSpec::Cartpole { episode_cap: 0 } => {
                Err(Error::Config("cartpole episode_cap must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match *self {
            EnvSpec::Catch { rows, cols } => rows * cols,
            EnvSpec::Cartpole { .. } => 4,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            EnvSpec::Catch { .. } => 3,
            EnvSpec::Cartpole { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Catch { .. } => "catch",
            EnvSpec::Cartpole { .. } => "cartpole",
        }
    }

    pub fn reset(&self, seed: u64) -> EnvState {
        match *self {
            EnvSpec::Catch { rows, cols } => EnvState::Catch(CatchState::reset(rows, cols, seed)),
            EnvSpec::Cartpole { episode_cap } => {
                EnvState::CartPole(CartPoleState::reset(episode_cap, seed))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnvState {
    Catch(CatchState),
    CartPole(CartPoleState),
}

impl EnvState {
    pub fn observation(&self) -> Vec<f64> {
        match self {
            EnvState::Catch(s) => s.observation(),
            EnvState::CartPole(s) => s.observation(),
        }
    }

    pub fn is_done(&self) -> bool {
        match self {
            EnvState::Catch(s) => s.done,
            EnvState::CartPole(s) => s.done,
        }
    }

    /// Returns `(next_state, reward, done)`.
    pub fn step(&self, action: usize) -> Result<(EnvState, f64, bool)> {
        match self {
            EnvState::Catch(s) => s.step(action).map(|(n, r, d)| (EnvState::Catch(n), r, d)),
            EnvState::CartPole(s) => s.step(action).map(|(n, r, d)| (EnvState::CartPole(n), r, d)),
        }
    }
}

/// Convenience: `(state, observation)` after reset.
pub fn env_reset(spec: &EnvSpec, seed: u64) -> (EnvState, Vec<f64>) {
    let s = spec.reset(seed);
    let obs = s.observation();
    (s, obs)
}

pub fn env_step(state: &EnvState, action: usize) -> Result<(EnvState, f64, bool)> {
    state.step(action)
}
