use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::hooks::{HookContext, HookEvent, TrainingHook};
use super::log::{MetricRow, MetricSeries, RunLog};
use crate::envs::{shuffle_labels, SupervisedTask};
use crate::error::{Error, Result};
use crate::nn::{loss_and_grad, Activation, LayerSpec, LossKind, Network, OptState};
use crate::rng;

/// Supervised classification training with optional periodic label shuffles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisedConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Shuffle labels after every this many epochs; `None` keeps them fixed.
    pub shuffle_every: Option<usize>,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            learning_rate: 0.01,
            momentum: 0.9,
            hidden: vec![128, 128],
            activation: Activation::Relu,
            shuffle_every: None,
        }
    }
}

impl SupervisedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be non-empty and positive".into()));
        }
        if self.shuffle_every == Some(0) {
            return Err(Error::Config("shuffle_every must be >= 1".into()));
        }
        Ok(())
    }
}

pub struct SupervisedOutput {
    pub series: MetricSeries,
    pub network: Network,
    pub task: SupervisedTask,
}

/// Trains a classifier with SGD + momentum and cross-entropy.
///
/// Hooks fire at the end of every epoch; one [`MetricRow`] per epoch records
/// the mean loss and the train accuracy (in the `return` column).
pub fn run_supervised(
    task: &SupervisedTask,
    config: &SupervisedConfig,
    seed: u64,
    hooks: &mut [Box<dyn TrainingHook>],
) -> Result<SupervisedOutput> {
    config.validate()?;
    if task.is_empty() {
        return Err(Error::Empty("supervised task"));
    }
    let specs = LayerSpec::mlp(task.inputs.cols(), &config.hidden, task.n_classes, config.activation);
    let mut net = Network::build(&specs, seed)?;
    let mut opt = OptState::sgd(&net, config.learning_rate, config.momentum)?;
    let mut order_rng = rng::seeded(seed, rng::stream::REPLAY);
    let mut shuffle_seeds = rng::seeded(seed, rng::stream::SHUFFLE);
    let mut task = task.clone();
    let mut log = RunLog::default();
    let mut grad_steps = 0u64;
    let mut order: Vec<usize> = (0..task.len()).collect();

    for epoch in 1..=config.epochs as u64 {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let x = task.inputs.select_rows(chunk);
            let y = task.label_matrix(chunk);
            let cache = net.forward_cached(&x)?;
            let (loss, grad) = loss_and_grad(LossKind::CrossEntropy, cache.output(), &y)?;
            let grads = net.backward_cached(&cache, &grad)?;
            opt.step(&mut net, &grads)?;
            loss_sum += loss;
            batches += 1;
            grad_steps += 1;
        }
        let accuracy = accuracy(&net, &task)?;
        {
            let mut ctx = HookContext {
                event: HookEvent::EpochEnd,
                step_grad: grad_steps,
                step_env: 0,
                epoch,
                online: &mut net,
                opt: &mut opt,
                states: &task.inputs,
                log: &mut log,
            };
            for h in hooks.iter_mut() {
                h.call(&mut ctx)?;
            }
        }
        log.series.rows.push(MetricRow {
            step_env: 0,
            step_grad: grad_steps,
            episode: epoch,
            episode_return: Some(accuracy),
            loss: Some(loss_sum / batches as f64),
            dormant_frac_tau0: log.last_frac_tau0,
            dormant_frac_tau: log.last_frac_tau,
            recycled_count: log.recycled_total,
            seed,
        });
        if let Some(k) = config.shuffle_every {
            if epoch % k as u64 == 0 && epoch < config.epochs as u64 {
                task = shuffle_labels(&task, rand::Rng::random(&mut shuffle_seeds));
            }
        }
    }
    Ok(SupervisedOutput {
        series: log.series,
        network: net,
        task,
    })
}

/// Fraction of samples whose arg-max logit equals the label.
pub fn accuracy(net: &Network, task: &SupervisedTask) -> Result<f64> {
    let logits = net.predict(&task.inputs)?;
    let correct = (0..task.len())
        .filter(|&i| super::dqn::argmax(logits.row(i)) == task.labels[i])
        .count();
    Ok(correct as f64 / task.len() as f64)
}
