use rand::Rng;
use serde::{Deserialize, Serialize};

use super::replay::{NStepTransition, ReplayBuffer};
use crate::error::{shape_err, Error, Result};
use crate::nn::{
    loss_and_grad, Activation, LayerSpec, LossKind, Matrix, Network, OptState, OptimizerKind,
    DQN_ADAM_EPS,
};
use crate::rng::{self, Rng as LabRng};

/// DQN hyper-parameters. Defaults are the desk-scale settings used on Catch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon_train: f64,
    pub epsilon_eval: f64,
    /// Gradient updates per environment step.
    pub replay_ratio: f64,
    /// Gradient steps between target syncs; derived from the replay ratio
    /// when unset.
    pub target_update_period: Option<u64>,
    /// `target_update_period × replay_ratio` when the period is derived.
    pub target_update_scale: f64,
    pub batch_size: usize,
    pub n_step: usize,
    /// Environment steps of uniform-random play before learning starts.
    pub min_history: usize,
    pub total_env_steps: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub huber_delta: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_train: 0.01,
            epsilon_eval: 0.001,
            replay_ratio: 0.25,
            target_update_period: None,
            target_update_scale: 2000.0,
            batch_size: 32,
            n_step: 1,
            min_history: 1000,
            total_env_steps: 100_000,
            buffer_capacity: 100_000,
            learning_rate: 3e-3,
            adam_eps: DQN_ADAM_EPS,
            weight_decay: 0.0,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            huber_delta: 1.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} not in [0, 1)", self.gamma));
        }
        for (name, e) in [("epsilon_train", self.epsilon_train), ("epsilon_eval", self.epsilon_eval)] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} {e} not in [0, 1]"));
            }
        }
        let rr = self.replay_ratio;
        let whole = |x: f64| x.is_finite() && x >= 1.0 && (x - x.round()).abs() < 1e-9;
        if !(rr > 0.0) || (rr >= 1.0 && !whole(rr)) || (rr < 1.0 && !whole(1.0 / rr)) {
            return bad(format!(
                "replay_ratio {rr} must be a positive integer or the reciprocal of one"
            ));
        }
        if self.batch_size == 0 || self.batch_size > self.min_history {
            return bad(format!(
                "batch_size {} must be in 1..=min_history ({})",
                self.batch_size, self.min_history
            ));
        }
        if self.n_step == 0 {
            return bad("n_step must be >= 1".into());
        }
        if self.buffer_capacity < self.min_history {
            return bad("buffer_capacity must be >= min_history".into());
        }
        if self.target_update_period() == 0 {
            return bad("target update period must be >= 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths {:?} must be non-empty and positive", self.hidden));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 || !(self.adam_eps > 0.0) {
            return bad("learning_rate and adam_eps must be > 0, weight_decay >= 0".into());
        }
        Ok(())
    }

    pub fn target_update_period(&self) -> u64 {
        self.target_update_period
            .unwrap_or_else(|| (self.target_update_scale / self.replay_ratio).round() as u64)
    }

    /// Gradient updates to run after post-warmup environment step `p` (1-based).
    pub fn updates_after_env_step(&self, p: u64) -> u64 {
        if self.replay_ratio >= 1.0 {
            self.replay_ratio.ceil() as u64
        } else {
            let every = (1.0 / self.replay_ratio).round() as u64;
            u64::from(p.is_multiple_of(every))
        }
    }

    pub fn layer_specs(&self, obs_dim: usize, n_actions: usize) -> Vec<LayerSpec> {
        LayerSpec::mlp(obs_dim, &self.hidden, n_actions, self.activation)
    }

    pub fn optimizer(&self, net: &Network) -> Result<OptState> {
        OptState::new(
            net,
            OptimizerKind::adam(self.adam_eps),
            self.learning_rate,
            self.weight_decay,
        )
    }
}

/// Online and target networks, optimizer, replay, and step counters.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub online: Network,
    pub target: Network,
    pub opt: OptState,
    pub buffer: ReplayBuffer,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub(crate) replay_rng: LabRng,
}

impl AgentState {
    pub fn new(config: &DqnConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let online = Network::build(&config.layer_specs(obs_dim, n_actions), seed)?;
        Self::from_network(config, online, seed)
    }

    pub fn from_network(config: &DqnConfig, online: Network, seed: u64) -> Result<Self> {
        let opt = config.optimizer(&online)?;
        Ok(Self {
            target: online.clone(),
            online,
            opt,
            buffer: ReplayBuffer::new(config.buffer_capacity, config.n_step)?,
            env_steps: 0,
            grad_steps: 0,
            replay_rng: rng::seeded(seed, rng::stream::REPLAY),
        })
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Greedy action with probability `1 − epsilon`, uniform action otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q.is_empty() {
        return Err(Error::Empty("q-value vector"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} not in [0, 1]")));
    }
    if rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..q.len()))
    } else {
        Ok(argmax(q))
    }
}

/// n-step bootstrap targets `Σ γᵏ r_k + γⁿ max_a Q_target(s_n, a)`, with no
/// bootstrap past a terminal.
pub fn td_targets(batch: &[NStepTransition], target: &Network, gamma: f64, n: usize) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = batch.iter().find(|t| t.rewards.len() > n || t.rewards.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "n-step item with {} rewards does not match n = {n}",
            bad.rewards.len()
        )));
    }
    let dim = target.input_dim();
    if let Some(bad) = batch.iter().find(|t| t.bootstrap_state.len() != dim) {
        return Err(shape_err("td_targets bootstrap state", dim, bad.bootstrap_state.len()));
    }
    let rows: Vec<&[f64]> = batch.iter().map(|t| t.bootstrap_state.as_slice()).collect();
    let q_next = target.predict(&Matrix::from_rows(&rows)?)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let boot = t.bootstrap_discount(gamma);
            let mut y = t.discounted_return(gamma);
            if boot != 0.0 {
                let q = q_next.row(i);
                y += boot * q[argmax(q)];
            }
            y
        })
        .collect())
}

/// Huber TD loss on the taken actions and its gradient w.r.t. all Q outputs.
pub fn td_loss_and_grad(
    q: &Matrix,
    actions: &[usize],
    targets: &[f64],
    delta: f64,
) -> Result<(f64, Matrix)> {
    if actions.len() != q.rows() || targets.len() != q.rows() {
        return Err(shape_err("td loss batch", q.rows(), actions.len().min(targets.len())));
    }
    let taken: Vec<f64> = actions.iter().enumerate().map(|(i, &a)| q.get(i, a)).collect();
    let pred = Matrix::from_vec(q.rows(), 1, taken)?;
    let tgt = Matrix::from_vec(q.rows(), 1, targets.to_vec())?;
    let (loss, g) = loss_and_grad(LossKind::Huber { delta }, &pred, &tgt)?;
    let mut grad = Matrix::zeros(q.rows(), q.cols());
    for (i, &a) in actions.iter().enumerate() {
        grad.set(i, a, g.get(i, 0));
    }
    Ok((loss, grad))
}

/// One gradient step on a uniformly sampled minibatch; syncs the target
/// network every `target_update_period` gradient steps.
pub fn train_step(state: &mut AgentState, config: &DqnConfig) -> Result<f64> {
    if state.buffer.len() < config.min_history.max(config.batch_size) {
        return Err(Error::BufferUnderfull {
            have: state.buffer.len(),
            need: config.min_history.max(config.batch_size),
        });
    }
    let batch = state.buffer.sample(config.batch_size, &mut state.replay_rng)?;
    let targets = td_targets(&batch, &state.target, config.gamma, config.n_step)?;
    let rows: Vec<&[f64]> = batch.iter().map(|t| t.s.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.a).collect();
    let loss = apply_regression_step(state, config, &Matrix::from_rows(&rows)?, |q| {
        td_loss_and_grad(q, &actions, &targets, config.huber_delta)
    })?;
    finish_grad_step(state, config);
    Ok(loss)
}

pub(crate) fn apply_regression_step(
    state: &mut AgentState,
    _config: &DqnConfig,
    inputs: &Matrix,
    loss_fn: impl FnOnce(&Matrix) -> Result<(f64, Matrix)>,
) -> Result<f64> {
    let cache = state.online.forward_cached(inputs)?;
    let (loss, grad) = loss_fn(cache.output())?;
    let grads = state.online.backward_cached(&cache, &grad)?;
    state.opt.step(&mut state.online, &grads)?;
    Ok(loss)
}

pub(crate) fn finish_grad_step(state: &mut AgentState, config: &DqnConfig) {
    state.grad_steps += 1;
    if state.grad_steps.is_multiple_of(config.target_update_period()) {
        state.target.copy_from(&state.online);
    }
}
