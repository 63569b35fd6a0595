use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// One environment step `(s, a, r, s', done)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Up to `n` consecutive same-episode transitions starting at `s`.
///
/// `rewards` holds the rewards actually observed (fewer than `n` when the
/// window hits the end of the episode or of the buffer); `bootstrap_state` is
/// the state after the last of them, and `done` says whether the window ended
/// on a terminal step.
#[derive(Clone, Debug, PartialEq)]
pub struct NStepTransition {
    pub s: Vec<f64>,
    pub a: usize,
    pub rewards: Vec<f64>,
    pub bootstrap_state: Vec<f64>,
    pub done: bool,
}

impl NStepTransition {
    /// `Σ γᵏ r_k` over the stored rewards.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut discount = 1.0;
        for r in &self.rewards {
            g += discount * r;
            discount *= gamma;
        }
        g
    }

    /// Multiplier of the bootstrap value: `γ^len`, or 0 after a terminal.
    pub fn bootstrap_discount(&self, gamma: f64) -> f64 {
        if self.done {
            0.0
        } else {
            gamma.powi(self.rewards.len() as i32)
        }
    }
}

#[derive(Clone, Debug)]
struct Stored {
    transition: Transition,
    episode: u64,
}

/// Fixed-capacity ring of transitions with n-step assembly.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    n_step: usize,
    items: Vec<Stored>,
    /// Transitions ever pushed; the item with global index `g` lives in slot
    /// `g % capacity` while `g >= total - len`.
    total: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, n_step: usize) -> Result<Self> {
        if capacity == 0 || n_step == 0 {
            return Err(Error::InvalidArgument(format!(
                "replay buffer needs capacity >= 1 and n_step >= 1 (got {capacity}, {n_step})"
            )));
        }
        Ok(Self {
            capacity,
            n_step,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            total: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_step(&self) -> usize {
        self.n_step
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition, episode: u64) {
        let item = Stored {
            transition,
            episode,
        };
        let slot = (self.total % self.capacity as u64) as usize;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.total += 1;
    }

    fn oldest(&self) -> u64 {
        self.total - self.items.len() as u64
    }

    fn at(&self, global: u64) -> &Stored {
        &self.items[(global % self.capacity as u64) as usize]
    }

    /// The `i`-th oldest transition.
    pub fn get(&self, i: usize) -> &Transition {
        &self.at(self.oldest() + i as u64).transition
    }

    /// Assembles the n-step item starting at the `i`-th oldest transition.
    pub fn n_step_item(&self, i: usize) -> NStepTransition {
        let start = self.oldest() + i as u64;
        let first = self.at(start);
        let mut rewards = Vec::with_capacity(self.n_step);
        let mut last = &first.transition;
        for k in 0..self.n_step as u64 {
            let g = start + k;
            if g >= self.total {
                break;
            }
            let item = self.at(g);
            if item.episode != first.episode {
                break;
            }
            rewards.push(item.transition.r);
            last = &item.transition;
            if item.transition.done {
                break;
            }
        }
        NStepTransition {
            s: first.transition.s.clone(),
            a: first.transition.a,
            rewards,
            bootstrap_state: last.s_next.clone(),
            done: last.done,
        }
    }

    /// Uniform indices in `0..len`, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::Empty("replay buffer"));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<NStepTransition>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| self.n_step_item(i))
            .collect())
    }

    /// A batch of stored states, drawn uniformly with replacement.
    pub fn sample_states<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix> {
        let idx = self.sample_indices(n, rng)?;
        let rows: Vec<&[f64]> = idx.iter().map(|&i| self.get(i).s.as_slice()).collect();
        Matrix::from_rows(&rows)
    }

    /// Every stored state, oldest first.
    pub fn all_states(&self) -> Result<Matrix> {
        let rows: Vec<&[f64]> = (0..self.len()).map(|i| self.get(i).s.as_slice()).collect();
        Matrix::from_rows(&rows)
    }
}
