use rand::Rng;

use super::dqn::{apply_regression_step, epsilon_greedy, finish_grad_step, train_step, AgentState, DqnConfig};
use super::hooks::{HookContext, HookEvent, StateSource, TrainingHook};
use super::log::{MetricRow, RunLog, MetricSeries};
use super::replay::{ReplayBuffer, Transition};
use crate::envs::{EnvSpec, RegressionTask};
use crate::error::{Error, Result};
use crate::nn::{loss_and_grad, LossKind, Matrix};
use crate::rng;

/// Result of a training run: the log and the final agent.
pub struct RunOutput {
    pub series: MetricSeries,
    pub agent: AgentState,
}

fn run_hooks(
    hooks: &mut [Box<dyn TrainingHook>],
    agent: &mut AgentState,
    states: Option<&dyn StateSource>,
    log: &mut RunLog,
) -> Result<()> {
    let AgentState {
        online,
        opt,
        buffer,
        env_steps,
        grad_steps,
        ..
    } = agent;
    let states: &dyn StateSource = match states {
        Some(s) => s,
        None => &*buffer,
    };
    let mut ctx = HookContext {
        event: HookEvent::GradStep,
        step_grad: *grad_steps,
        step_env: *env_steps,
        epoch: 0,
        online,
        opt,
        states,
        log,
    };
    for h in hooks.iter_mut() {
        h.call(&mut ctx)?;
    }
    Ok(())
}

struct LossMeter {
    sum: f64,
    n: u64,
}

impl LossMeter {
    fn take(&mut self) -> Option<f64> {
        let out = (self.n > 0).then(|| self.sum / self.n as f64);
        self.sum = 0.0;
        self.n = 0;
        out
    }
}

/// Online DQN training on `env`.
///
/// The first `min_history` environment steps use uniform-random actions and
/// no updates. Afterwards each environment step is followed by
/// `⌈RR⌉` updates when `RR ≥ 1`, or one update every `1/RR` steps otherwise.
/// Hooks run after every gradient step; one [`MetricRow`] is logged per
/// finished episode.
pub fn run_training(
    env: &EnvSpec,
    config: &DqnConfig,
    seed: u64,
    hooks: &mut [Box<dyn TrainingHook>],
) -> Result<RunOutput> {
    env.validate()?;
    let agent = AgentState::new(config, env.obs_dim(), env.n_actions(), seed)?;
    run_training_from(env, config, seed, agent, hooks)
}

/// Like [`run_training`] but continues from an existing agent.
pub fn run_training_from(
    env: &EnvSpec,
    config: &DqnConfig,
    seed: u64,
    mut agent: AgentState,
    hooks: &mut [Box<dyn TrainingHook>],
) -> Result<RunOutput> {
    config.validate()?;
    let mut env_rng = rng::seeded(seed, rng::stream::ENV);
    let mut act_rng = rng::seeded(seed, rng::stream::ACT);
    let mut log = RunLog::default();
    let mut meter = LossMeter { sum: 0.0, n: 0 };
    let n_actions = env.n_actions();

    let mut episode = 0u64;
    let mut state = env.reset(env_rng.random());
    let mut obs = state.observation();
    let mut ep_return = 0.0;
    let warmup = config.min_history as u64;

    for t in 0..config.total_env_steps as u64 {
        let action = if t < warmup {
            act_rng.random_range(0..n_actions)
        } else {
            let q = agent.online.predict_one(&obs)?;
            epsilon_greedy(&q, config.epsilon_train, &mut act_rng)?
        };
        let (next, reward, done) = state.step(action)?;
        let next_obs = next.observation();
        agent.buffer.push(
            Transition {
                s: std::mem::take(&mut obs),
                a: action,
                r: reward,
                s_next: next_obs.clone(),
                done,
            },
            episode,
        );
        agent.env_steps += 1;
        ep_return += reward;
        if done {
            log.series.rows.push(MetricRow {
                step_env: agent.env_steps,
                step_grad: agent.grad_steps,
                episode,
                episode_return: Some(ep_return),
                loss: meter.take(),
                dormant_frac_tau0: log.last_frac_tau0,
                dormant_frac_tau: log.last_frac_tau,
                recycled_count: log.recycled_total,
                seed,
            });
            episode += 1;
            ep_return = 0.0;
            state = env.reset(env_rng.random());
            obs = state.observation();
        } else {
            state = next;
            obs = next_obs;
        }

        if t >= warmup {
            for _ in 0..config.updates_after_env_step(t - warmup + 1) {
                let loss = train_step(&mut agent, config)?;
                meter.sum += loss;
                meter.n += 1;
                run_hooks(hooks, &mut agent, None, &mut log)?;
            }
        }
    }
    Ok(RunOutput {
        series: log.series,
        agent,
    })
}

/// What offline training regresses towards.
pub enum OfflineTargets<'a> {
    /// Ordinary bootstrapped TD targets from the frozen buffer.
    Bootstrap,
    /// Frozen regression targets over the task inputs (all actions).
    Frozen(&'a RegressionTask),
}

/// Gradient steps only, on a buffer that is never appended to.
///
/// A [`MetricRow`] with the mean loss is logged every `log_every` steps.
#[allow(clippy::too_many_arguments)]
pub fn run_offline(
    buffer: ReplayBuffer,
    targets: OfflineTargets<'_>,
    config: &DqnConfig,
    grad_steps: u64,
    log_every: u64,
    seed: u64,
    obs_dim: usize,
    n_actions: usize,
    hooks: &mut [Box<dyn TrainingHook>],
) -> Result<RunOutput> {
    if buffer.is_empty() {
        return Err(Error::Empty("offline replay buffer"));
    }
    let mut agent = AgentState::new(config, obs_dim, n_actions, seed)?;
    agent.buffer = buffer;
    run_offline_from(agent, targets, config, grad_steps, log_every, seed, hooks)
}

pub fn run_offline_from(
    mut agent: AgentState,
    targets: OfflineTargets<'_>,
    config: &DqnConfig,
    grad_steps: u64,
    log_every: u64,
    seed: u64,
    hooks: &mut [Box<dyn TrainingHook>],
) -> Result<RunOutput> {
    let mut log = RunLog::default();
    let mut meter = LossMeter { sum: 0.0, n: 0 };
    let mut batch_rng = rng::seeded(seed, rng::stream::REPLAY);
    let mut config = config.clone();
    // The buffer is fixed, so only the minibatch has to fit.
    config.min_history = config.batch_size;
    for _ in 0..grad_steps {
        let loss = match targets {
            OfflineTargets::Bootstrap => train_step(&mut agent, &config)?,
            OfflineTargets::Frozen(task) => {
                if task.is_empty() {
                    return Err(Error::Empty("regression task"));
                }
                let idx: Vec<usize> = (0..config.batch_size)
                    .map(|_| batch_rng.random_range(0..task.len()))
                    .collect();
                let x = task.inputs.select_rows(&idx);
                let y = task.targets().select_rows(&idx);
                let loss = apply_regression_step(&mut agent, &config, &x, |q| {
                    loss_and_grad(LossKind::Mse, q, &y)
                })?;
                finish_grad_step(&mut agent, &config);
                loss
            }
        };
        meter.sum += loss;
        meter.n += 1;
        let source: Option<&dyn StateSource> = match targets {
            OfflineTargets::Frozen(task) => Some(&task.inputs as &dyn StateSource),
            OfflineTargets::Bootstrap => None,
        };
        run_hooks(hooks, &mut agent, source, &mut log)?;
        if log_every > 0 && agent.grad_steps.is_multiple_of(log_every) {
            log.series.rows.push(MetricRow {
                step_env: agent.env_steps,
                step_grad: agent.grad_steps,
                episode: 0,
                episode_return: None,
                loss: meter.take(),
                dormant_frac_tau0: log.last_frac_tau0,
                dormant_frac_tau: log.last_frac_tau,
                recycled_count: log.recycled_total,
                seed,
            });
        }
    }
    Ok(RunOutput {
        series: log.series,
        agent,
    })
}

/// Fills a buffer with `steps` transitions of a uniform-random behaviour policy.
pub fn collect_random(env: &EnvSpec, steps: usize, n_step: usize, seed: u64) -> Result<ReplayBuffer> {
    let mut buffer = ReplayBuffer::new(steps.max(1), n_step)?;
    let mut env_rng = rng::seeded(seed, rng::stream::ENV);
    let mut act_rng = rng::seeded(seed, rng::stream::ACT);
    let mut state = env.reset(env_rng.random());
    let mut episode = 0;
    for _ in 0..steps {
        let a = act_rng.random_range(0..env.n_actions());
        let (next, r, done) = state.step(a)?;
        buffer.push(
            Transition {
                s: state.observation(),
                a,
                r,
                s_next: next.observation(),
                done,
            },
            episode,
        );
        if done {
            episode += 1;
            state = env.reset(env_rng.random());
        } else {
            state = next;
        }
    }
    Ok(buffer)
}

/// Mean return of `episodes` ε-greedy evaluation episodes.
pub fn evaluate(
    net: &crate::nn::Network,
    env: &EnvSpec,
    episodes: usize,
    epsilon: f64,
    seed: u64,
) -> Result<f64> {
    let mut env_rng = rng::seeded(seed, rng::stream::ENV);
    let mut act_rng = rng::seeded(seed, rng::stream::ACT);
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(env_rng.random());
        loop {
            let q = net.predict_one(&state.observation())?;
            let (next, r, done) = state.step(epsilon_greedy(&q, epsilon, &mut act_rng)?)?;
            total += r;
            state = next;
            if done {
                break;
            }
        }
    }
    Ok(total / episodes.max(1) as f64)
}

/// Penultimate-layer features of `net` on `inputs`.
pub fn penultimate_features(net: &crate::nn::Network, inputs: &Matrix) -> Result<Matrix> {
    let (_, mut trace) = net.forward(inputs)?;
    trace
        .layers
        .pop()
        .ok_or(Error::Empty("hidden layer list"))
}
