use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_LIMIT: f64 = 2.4;

pub const PUSH_LEFT: usize = 0;
pub const PUSH_RIGHT: usize = 1;

/// Classic cart-pole, integrated with semi-implicit Euler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
    pub episode_cap: usize,
    pub done: bool,
}

impl CartPoleState {
    pub fn reset(episode_cap: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::stream::ENV);
        let mut u = || r.random_range(-0.05..0.05);
        Self {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
            steps: 0,
            episode_cap,
            done: false,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn step(&self, action: usize) -> Result<(Self, f64, bool)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let force = match action {
            PUSH_LEFT => -FORCE_MAG,
            PUSH_RIGHT => FORCE_MAG,
            a => return Err(Error::InvalidArgument(format!("cartpole action {a} not in 0..2"))),
        };
        self.step_with_force(force)
    }

    /// One integration step under an arbitrary horizontal force.
    pub fn step_with_force(&self, force: f64) -> Result<(Self, f64, bool)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let total_mass = CART_MASS + POLE_MASS;
        let polemass_length = POLE_MASS * HALF_LENGTH;
        let (sin, cos) = self.theta.sin_cos();
        let temp = (force + polemass_length * self.theta_dot * self.theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;

        let mut next = *self;
        next.x_dot = self.x_dot + DT * x_acc;
        next.x = self.x + DT * next.x_dot;
        next.theta_dot = self.theta_dot + DT * theta_acc;
        next.theta = self.theta + DT * next.theta_dot;
        next.steps += 1;
        next.done = next.theta.abs() > THETA_LIMIT
            || next.x.abs() > X_LIMIT
            || next.steps >= self.episode_cap;
        Ok((next, 1.0, next.done))
    }
}
