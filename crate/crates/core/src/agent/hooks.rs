//! Analysis and intervention hooks run between gradient steps.

use rand::Rng;

use super::log::{DormancyRow, OverlapRow, PruneRow, RecycleRow, RunLog};
use super::replay::ReplayBuffer;
use super::dqn::argmax;
use crate::dormancy::{neuron_scores, prune_dormant, DormancyReport, OverlapTracker};
use crate::envs::EnvSpec;
use crate::error::Result;
use crate::nn::{Matrix, Network, OptState};
use crate::recycle::{
    recycle_neurons, reset_last_layers, select_for_recycling, RecycleSchedule, RecycleStrategy,
    SelectionStrategy,
};
use crate::rng::{self, Rng as LabRng};

/// Where scoring batches come from.
pub trait StateSource {
    fn sample_states(&self, n: usize, rng: &mut LabRng) -> Result<Matrix>;
}

impl StateSource for ReplayBuffer {
    fn sample_states(&self, n: usize, rng: &mut LabRng) -> Result<Matrix> {
        ReplayBuffer::sample_states(self, n, rng)
    }
}

/// A fixed set of inputs; `n == 0` or `n >= len` returns all of them.
impl StateSource for Matrix {
    fn sample_states(&self, n: usize, rng: &mut LabRng) -> Result<Matrix> {
        if self.rows() == 0 {
            return Err(crate::Error::Empty("state matrix"));
        }
        if n == 0 || n >= self.rows() {
            return Ok(self.clone());
        }
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.rows())).collect();
        Ok(self.select_rows(&idx))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HookEvent {
    GradStep,
    EpochEnd,
}

pub struct HookContext<'a> {
    pub event: HookEvent,
    pub step_grad: u64,
    pub step_env: u64,
    pub epoch: u64,
    pub online: &'a mut Network,
    pub opt: &'a mut OptState,
    pub states: &'a dyn StateSource,
    pub log: &'a mut RunLog,
}

pub trait TrainingHook: Send {
    fn call(&mut self, ctx: &mut HookContext<'_>) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trigger {
    EveryGradSteps(u64),
    EveryEpoch,
}

impl Trigger {
    fn fires(&self, ctx: &HookContext<'_>) -> bool {
        match (*self, ctx.event) {
            (Trigger::EveryGradSteps(n), HookEvent::GradStep) => n > 0 && ctx.step_grad.is_multiple_of(n),
            (Trigger::EveryEpoch, HookEvent::EpochEnd) => true,
            _ => false,
        }
    }
}

/// Measures dormancy at several thresholds and tracks overlap per layer.
pub struct DormancyProbe {
    pub trigger: Trigger,
    pub taus: Vec<f64>,
    /// The τ reported in `MetricRow::dormant_frac_tau`.
    pub primary_tau: f64,
    /// Scoring batch size; 0 means the whole state source when it is finite.
    pub batch_size: usize,
    rng: LabRng,
    trackers: Vec<Vec<OverlapTracker>>,
}

impl DormancyProbe {
    pub fn new(trigger: Trigger, taus: Vec<f64>, primary_tau: f64, batch_size: usize, seed: u64) -> Self {
        let mut taus = taus;
        for t in [0.0, primary_tau] {
            if !taus.contains(&t) {
                taus.push(t);
            }
        }
        taus.sort_by(f64::total_cmp);
        Self {
            trigger,
            trackers: vec![Vec::new(); taus.len()],
            taus,
            primary_tau,
            batch_size,
            rng: rng::seeded(seed, rng::stream::DORMANCY),
        }
    }
}

impl TrainingHook for DormancyProbe {
    fn call(&mut self, ctx: &mut HookContext<'_>) -> Result<()> {
        if !self.trigger.fires(ctx) {
            return Ok(());
        }
        let batch = ctx.states.sample_states(self.batch_size, &mut self.rng)?;
        let (_, trace) = ctx.online.forward(&batch)?;
        let scores = neuron_scores(&trace)?;
        for (ti, &tau) in self.taus.iter().enumerate() {
            let report = DormancyReport::new(&scores, tau, ctx.step_grad);
            if self.trackers[ti].is_empty() {
                self.trackers[ti] = (0..report.layers.len()).map(OverlapTracker::new).collect();
            }
            for (layer, ld) in report.layers.iter().enumerate() {
                let ov = self.trackers[ti][layer].update(&ld.dormant);
                ctx.log.series.dormancy.push(DormancyRow {
                    step_grad: ctx.step_grad,
                    layer,
                    tau,
                    dormant_count: ld.dormant.len(),
                    layer_size: ld.active,
                    dormant_fraction: ld.fraction,
                    overlap: ov.vs_union,
                });
                ctx.log.series.overlap.push(OverlapRow {
                    step_grad: ctx.step_grad,
                    layer,
                    tau,
                    overlap_first: ov.vs_first,
                    overlap_union: ov.vs_union,
                });
            }
            let frac = report.fraction().ok();
            if tau == 0.0 {
                ctx.log.last_frac_tau0 = frac;
            }
            if tau == self.primary_tau {
                ctx.log.last_frac_tau = frac;
            }
        }
        Ok(())
    }
}

/// Periodic neuron recycling (ReDo and its selection variants).
pub struct Recycler {
    pub schedule: RecycleSchedule,
    pub selection: SelectionStrategy,
    pub strategy: RecycleStrategy,
    pub batch_size: usize,
    rng: LabRng,
}

impl Recycler {
    pub fn new(
        schedule: RecycleSchedule,
        selection: SelectionStrategy,
        strategy: RecycleStrategy,
        batch_size: usize,
        seed: u64,
    ) -> Self {
        Self {
            schedule,
            selection,
            strategy,
            batch_size,
            rng: rng::seeded(seed, rng::stream::RECYCLE),
        }
    }

    /// ReDo with threshold `tau` every `period` gradient steps.
    pub fn redo(tau: f64, period: u64, batch_size: usize, seed: u64) -> Self {
        Self::new(
            RecycleSchedule::every(period),
            SelectionStrategy::Threshold { tau },
            RecycleStrategy::default(),
            batch_size,
            seed,
        )
    }
}

impl TrainingHook for Recycler {
    fn call(&mut self, ctx: &mut HookContext<'_>) -> Result<()> {
        if ctx.event != HookEvent::GradStep || !self.schedule.is_due(ctx.step_grad) {
            return Ok(());
        }
        let selection = match self.schedule.fraction_schedule.fraction_at(ctx.step_grad) {
            Some(f) => self.selection.with_fraction(f),
            None => self.selection,
        };
        let batch = ctx.states.sample_states(self.batch_size, &mut self.rng)?;
        let (_, trace) = ctx.online.forward(&batch)?;
        let scores = neuron_scores(&trace)?;
        let selected = select_for_recycling(ctx.online, &scores, selection, &mut self.rng)?;
        recycle_neurons(ctx.online, ctx.opt, &selected, self.strategy, &mut self.rng)?;
        let label = format!("{}/{}/opt_reset", selection.name(), self.strategy);
        for (layer, set) in selected.iter().enumerate() {
            ctx.log.recycled_total += set.len() as u64;
            ctx.log.series.recycle.push(RecycleRow {
                step_grad: ctx.step_grad,
                layer,
                n_recycled: set.len(),
                strategy: label.clone(),
                tau_or_fraction: selection.parameter(),
            });
        }
        Ok(())
    }
}

/// Periodic re-initialisation of the last `k` layers.
pub struct LayerReset {
    pub period: u64,
    pub k: usize,
    rng: LabRng,
}

impl LayerReset {
    pub fn new(period: u64, k: usize, seed: u64) -> Self {
        Self {
            period,
            k,
            rng: rng::seeded(seed, rng::stream::RESET),
        }
    }
}

impl TrainingHook for LayerReset {
    fn call(&mut self, ctx: &mut HookContext<'_>) -> Result<()> {
        if ctx.event != HookEvent::GradStep || self.period == 0 || !ctx.step_grad.is_multiple_of(self.period) {
            return Ok(());
        }
        reset_last_layers(ctx.online, self.k, ctx.opt, &mut self.rng)?;
        let n = ctx.online.layers().len();
        for layer in n - self.k..n {
            ctx.log.series.recycle.push(RecycleRow {
                step_grad: ctx.step_grad,
                layer,
                n_recycled: ctx.online.layers()[layer].spec.out_dim,
                strategy: format!("reset_last_{}", self.k),
                tau_or_fraction: self.k as f64,
            });
        }
        Ok(())
    }
}

/// Greedy rollouts of `net` from the given reset seeds. Returns the mean
/// return and every visited (pre-action) state.
pub fn greedy_rollouts(net: &Network, env: &EnvSpec, seeds: &[u64]) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut total = 0.0;
    let mut visited = Vec::new();
    for &seed in seeds {
        let mut state = env.reset(seed);
        loop {
            let obs = state.observation();
            let a = argmax(&net.predict_one(&obs)?);
            visited.push(obs);
            let (next, r, done) = state.step(a)?;
            total += r;
            state = next;
            if done {
                break;
            }
        }
    }
    Ok((total / seeds.len().max(1) as f64, visited))
}

/// Prunes every τ=0-dormant neuron, scored on the states visited by greedy
/// evaluation episodes, and logs the evaluation return before and after.
pub struct PruneProbe {
    pub period: u64,
    pub env: EnvSpec,
    pub eval_seeds: Vec<u64>,
}

impl PruneProbe {
    pub fn new(period: u64, env: EnvSpec, n_episodes: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::stream::PRUNE);
        Self {
            period,
            env,
            eval_seeds: (0..n_episodes).map(|_| r.random()).collect(),
        }
    }
}

impl TrainingHook for PruneProbe {
    fn call(&mut self, ctx: &mut HookContext<'_>) -> Result<()> {
        if ctx.event != HookEvent::GradStep || self.period == 0 || !ctx.step_grad.is_multiple_of(self.period) {
            return Ok(());
        }
        let (before, visited) = greedy_rollouts(ctx.online, &self.env, &self.eval_seeds)?;
        let (_, trace) = ctx.online.forward(&Matrix::from_rows(&visited)?)?;
        let report = DormancyReport::new(&neuron_scores(&trace)?, 0.0, ctx.step_grad);
        let pruned_now = prune_dormant(ctx.online, &report.dormant_sets())?;
        let (after, _) = greedy_rollouts(ctx.online, &self.env, &self.eval_seeds)?;
        let pruned_total = ctx.online.masks().iter().flatten().filter(|&&m| m).count();
        ctx.log.series.prune.push(PruneRow {
            step_grad: ctx.step_grad,
            pruned_now,
            pruned_total,
            return_before: before,
            return_after: after,
        });
        Ok(())
    }
}
