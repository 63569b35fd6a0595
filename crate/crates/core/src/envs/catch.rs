use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const CATCH_LEFT: usize = 0;
pub const CATCH_STAY: usize = 1;
pub const CATCH_RIGHT: usize = 2;

/// Catch: a pellet falls one row per step; the paddle on the bottom row
/// moves left, stays, or moves right. Reward +1 for a catch, −1 for a miss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CatchState {
    pub rows: usize,
    pub cols: usize,
    pub pellet_row: usize,
    pub pellet_col: usize,
    pub paddle_col: usize,
    pub done: bool,
}

impl CatchState {
    pub fn reset(rows: usize, cols: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::stream::ENV);
        Self {
            rows,
            cols,
            pellet_row: 0,
            pellet_col: r.random_range(0..cols),
            paddle_col: cols / 2,
            done: false,
        }
    }

    /// Flattened `rows × cols` grid with 1.0 at the pellet and the paddle.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.rows * self.cols];
        obs[self.pellet_row * self.cols + self.pellet_col] = 1.0;
        obs[(self.rows - 1) * self.cols + self.paddle_col] = 1.0;
        obs
    }

    pub fn step(&self, action: usize) -> Result<(Self, f64, bool)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let mut next = *self;
        next.paddle_col = match action {
            CATCH_LEFT => self.paddle_col.saturating_sub(1),
            CATCH_STAY => self.paddle_col,
            CATCH_RIGHT => (self.paddle_col + 1).min(self.cols - 1),
            a => return Err(Error::InvalidArgument(format!("catch action {a} not in 0..3"))),
        };
        next.pellet_row += 1;
        if next.pellet_row == self.rows - 1 {
            next.done = true;
            let reward = if next.pellet_col == next.paddle_col { 1.0 } else { -1.0 };
            return Ok((next, reward, true));
        }
        Ok((next, 0.0, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_has_two_ones() {
        for seed in 0..20 {
            let s = CatchState::reset(10, 5, seed);
            let obs = s.observation();
            assert_eq!(obs.iter().filter(|&&v| v == 1.0).count(), 2);
            assert_eq!(obs.iter().filter(|&&v| v == 0.0).count(), 48);
            assert_eq!(s.paddle_col, 2);
        }
    }

    #[test]
    fn aligned_pellet_above_bottom_is_caught() {
        let s = CatchState {
            rows: 10,
            cols: 5,
            pellet_row: 8,
            pellet_col: 3,
            paddle_col: 3,
            done: false,
        };
        let (next, r, done) = s.step(CATCH_STAY).unwrap();
        assert!(done && next.done);
        assert_eq!(r, 1.0);
        assert!(next.step(CATCH_STAY).is_err());
    }

    #[test]
    fn misaligned_pellet_is_missed() {
        let s = CatchState {
            rows: 10,
            cols: 5,
            pellet_row: 8,
            pellet_col: 0,
            paddle_col: 3,
            done: false,
        };
        assert_eq!(s.step(CATCH_LEFT).unwrap().1, -1.0);
    }

    #[test]
    fn episode_lasts_rows_minus_one_steps() {
        let mut s = CatchState::reset(10, 5, 3);
        let mut steps = 0;
        loop {
            let (n, r, done) = s.step(CATCH_RIGHT).unwrap();
            steps += 1;
            s = n;
            if done {
                break;
            }
            assert_eq!(r, 0.0);
        }
        assert_eq!(steps, 9);
    }

    #[test]
    fn paddle_clamps_at_walls() {
        let mut s = CatchState::reset(10, 5, 0);
        for _ in 0..4 {
            s = s.step(CATCH_LEFT).unwrap().0;
        }
        assert_eq!(s.paddle_col, 0);
        assert!(s.step(7).is_err());
    }
}
