//! Recycling dormant neurons (ReDo), alternative neuron-selection rules,
//! the cosine fraction schedule, and the last-layer reset baseline.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dormancy::{neuron_scores, LayerScores};
use crate::error::{Error, Result};
use crate::nn::{ActivationTrace, Network, OptState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomingInit {
    /// Re-draw from the layer's original init distribution.
    #[default]
    ReinitOriginal,
    /// Re-draw, then rescale to the mean incoming norm of the layer's
    /// non-recycled neurons.
    NormScaled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutgoingInit {
    #[default]
    Zero,
    RandomInit,
}

/// How a recycled neuron's weights are re-initialised. The default is ReDo.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecycleStrategy {
    #[serde(default)]
    pub incoming: IncomingInit,
    #[serde(default)]
    pub outgoing: OutgoingInit,
}

impl fmt::Display for RecycleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inc = match self.incoming {
            IncomingInit::ReinitOriginal => "reinit_original",
            IncomingInit::NormScaled => "norm_scaled",
        };
        let out = match self.outgoing {
            OutgoingInit::Zero => "zero",
            OutgoingInit::RandomInit => "random_init",
        };
        write!(f, "{inc}+{out}")
    }
}

/// Which neurons get recycled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SelectionStrategy {
    /// Every τ-dormant neuron.
    Threshold { tau: f64 },
    /// The `fraction` of neurons with the lowest scores.
    LowestScore { fraction: f64 },
    /// The `fraction` of neurons with the highest scores.
    InverseScore { fraction: f64 },
    /// A uniformly random `fraction` of neurons.
    Random { fraction: f64 },
    /// The `fraction` of neurons with the lowest `score × ‖outgoing‖₁`.
    Utility { fraction: f64 },
}

impl SelectionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::Threshold { .. } => "threshold",
            SelectionStrategy::LowestScore { .. } => "lowest_score",
            SelectionStrategy::InverseScore { .. } => "inverse_score",
            SelectionStrategy::Random { .. } => "random",
            SelectionStrategy::Utility { .. } => "utility",
        }
    }

    /// τ for threshold selection, the fraction otherwise.
    pub fn parameter(&self) -> f64 {
        match *self {
            SelectionStrategy::Threshold { tau } => tau,
            SelectionStrategy::LowestScore { fraction }
            | SelectionStrategy::InverseScore { fraction }
            | SelectionStrategy::Random { fraction }
            | SelectionStrategy::Utility { fraction } => fraction,
        }
    }

    /// Same kind with a new fraction; threshold selection is returned unchanged.
    pub fn with_fraction(self, f: f64) -> Self {
        match self {
            SelectionStrategy::Threshold { .. } => self,
            SelectionStrategy::LowestScore { .. } => SelectionStrategy::LowestScore { fraction: f },
            SelectionStrategy::InverseScore { .. } => SelectionStrategy::InverseScore { fraction: f },
            SelectionStrategy::Random { .. } => SelectionStrategy::Random { fraction: f },
            SelectionStrategy::Utility { .. } => SelectionStrategy::Utility { fraction: f },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionStrategy::Threshold { tau } if !(tau >= 0.0) => {
                Err(Error::InvalidArgument(format!("tau {tau} must be >= 0")))
            }
            SelectionStrategy::Threshold { .. } => Ok(()),
            _ => {
                let f = self.parameter();
                if (0.0..=1.0).contains(&f) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("fraction {f} not in [0, 1]")))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FractionSchedule {
    /// Use the selection strategy's own fraction.
    #[default]
    None,
    /// `start/2 · (1 + cos(π t / horizon))`, from `start` down to 0.
    Cosine { start: f64, horizon: u64 },
}

impl FractionSchedule {
    pub fn fraction_at(&self, t: u64) -> Option<f64> {
        match *self {
            FractionSchedule::None => None,
            FractionSchedule::Cosine { start, horizon } => {
                Some(cosine_schedule(t.min(horizon), horizon, start))
            }
        }
    }
}

/// When recycling happens, and with what fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecycleSchedule {
    /// Gradient steps between recycling passes.
    pub period: u64,
    #[serde(default)]
    pub fraction_schedule: FractionSchedule,
}

impl RecycleSchedule {
    pub fn every(period: u64) -> Self {
        Self {
            period,
            fraction_schedule: FractionSchedule::None,
        }
    }

    pub fn is_due(&self, grad_step: u64) -> bool {
        self.period > 0 && grad_step > 0 && grad_step.is_multiple_of(self.period)
    }
}

/// Audit record of one recycling pass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecycleEvent {
    pub step_grad: u64,
    pub recycled: Vec<Vec<usize>>,
    pub strategy: RecycleStrategy,
    pub selection: &'static str,
    pub tau_or_fraction: f64,
    /// Optimizer moments of touched parameters were zeroed.
    pub optimizer_reset: bool,
}

impl RecycleEvent {
    pub fn total(&self) -> usize {
        self.recycled.iter().map(Vec::len).sum()
    }
}

/// Fraction schedule starting at 0.1 and decaying to 0 over `horizon` steps.
pub fn cosine_fraction(t: u64, horizon: u64) -> Result<f64> {
    if t > horizon {
        return Err(Error::InvalidArgument(format!("t = {t} exceeds horizon {horizon}")));
    }
    Ok(cosine_schedule(t, horizon, 0.1))
}

fn cosine_schedule(t: u64, horizon: u64, start: f64) -> f64 {
    if horizon == 0 {
        return start;
    }
    let phase = std::f64::consts::PI * t as f64 / horizon as f64;
    0.5 * start * (1.0 + phase.cos())
}

/// `⌈fraction · n⌉`, robust to products like `0.3 · 10 = 3.0000000000000004`.
fn fraction_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    ((x - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Picks the neurons to recycle in every hidden layer.
///
/// `net` is only consulted by utility selection (outgoing weight norms).
/// Ties are broken towards the lowest index. Pruned neurons are never chosen.
pub fn select_for_recycling<R: Rng + ?Sized>(
    net: &Network,
    scores: &[LayerScores],
    strategy: SelectionStrategy,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    strategy.validate()?;
    let mut out = Vec::with_capacity(scores.len());
    for (layer, ls) in scores.iter().enumerate() {
        let candidates: Vec<usize> = (0..ls.width()).filter(|&i| !ls.pruned[i]).collect();
        let k = fraction_count(strategy.parameter(), candidates.len());
        let mut chosen = match strategy {
            SelectionStrategy::Threshold { tau } => ls.dormant(tau),
            SelectionStrategy::LowestScore { .. } => {
                lowest_k(&candidates, k, |i| ls.scores[i])
            }
            SelectionStrategy::InverseScore { .. } => {
                lowest_k(&candidates, k, |i| -ls.scores[i])
            }
            SelectionStrategy::Utility { .. } => {
                lowest_k(&candidates, k, |i| ls.scores[i] * net.outgoing_l1(layer, i))
            }
            SelectionStrategy::Random { .. } => index::sample(rng, candidates.len(), k)
                .into_iter()
                .map(|j| candidates[j])
                .collect(),
        };
        chosen.sort_unstable();
        out.push(chosen);
    }
    Ok(out)
}

fn lowest_k(candidates: &[usize], k: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = candidates.iter().map(|&i| (key(i), i)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Re-initialises the selected hidden neurons and zeroes the optimizer
/// moments of every parameter touched.
pub fn recycle_neurons<R: Rng + ?Sized>(
    net: &mut Network,
    opt: &mut OptState,
    selected: &[Vec<usize>],
    strategy: RecycleStrategy,
    rng: &mut R,
) -> Result<()> {
    if selected.len() > net.num_hidden_layers() {
        return Err(Error::InvalidArgument(format!(
            "{} selections for {} hidden layers",
            selected.len(),
            net.num_hidden_layers()
        )));
    }
    for (layer, neurons) in selected.iter().enumerate() {
        if neurons.is_empty() {
            continue;
        }
        let width = net.hidden_widths()[layer];
        if let Some(&bad) = neurons.iter().find(|&&i| i >= width) {
            return Err(Error::InvalidArgument(format!(
                "neuron {bad} out of range in hidden layer {layer}"
            )));
        }
        let target_norm = match strategy.incoming {
            IncomingInit::NormScaled => {
                let kept: Vec<f64> = (0..width)
                    .filter(|i| !neurons.contains(i) && !net.is_pruned(layer, *i))
                    .map(|i| net.incoming_norm(layer, i))
                    .collect();
                (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
            }
            IncomingInit::ReinitOriginal => None,
        };
        for &i in neurons {
            if net.is_pruned(layer, i) {
                continue;
            }
            net.resample_incoming(layer, i, rng);
            if let Some(target) = target_norm {
                let norm = net.incoming_norm(layer, i);
                if norm > 0.0 {
                    let w = &mut net.layer_mut(layer).weights;
                    for r in 0..w.rows() {
                        w.set(r, i, w.get(r, i) * target / norm);
                    }
                }
            }
            match strategy.outgoing {
                OutgoingInit::Zero => net.layer_mut(layer + 1).weights.row_mut(i).fill(0.0),
                OutgoingInit::RandomInit => net.resample_row(layer + 1, i, rng),
            }
            opt.reset_incoming(layer, i);
            opt.reset_row(layer + 1, i);
        }
    }
    Ok(())
}

/// One ReDo pass: recycle every τ-dormant unpruned hidden neuron of `net`,
/// scored on `trace`.
pub fn redo_step<R: Rng + ?Sized>(
    net: &mut Network,
    trace: &ActivationTrace,
    tau: f64,
    strategy: RecycleStrategy,
    opt: &mut OptState,
    rng: &mut R,
) -> Result<RecycleEvent> {
    check_trace(net, trace)?;
    let scores = neuron_scores(trace)?;
    let selection = SelectionStrategy::Threshold { tau };
    let selected = select_for_recycling(net, &scores, selection, rng)?;
    recycle_neurons(net, opt, &selected, strategy, rng)?;
    Ok(RecycleEvent {
        step_grad: opt.steps_taken(),
        recycled: selected,
        strategy,
        selection: selection.name(),
        tau_or_fraction: tau,
        optimizer_reset: true,
    })
}

pub(crate) fn check_trace(net: &Network, trace: &ActivationTrace) -> Result<()> {
    let widths: Vec<usize> = trace.layers.iter().map(|m| m.cols()).collect();
    if widths != net.hidden_widths() {
        return Err(crate::error::shape_err(
            "trace/network hidden widths",
            format!("{:?}", net.hidden_widths()),
            format!("{widths:?}"),
        ));
    }
    Ok(())
}

/// Re-initialises the last `k` layers from their stored init distributions,
/// zeroes their optimizer moments and clears their prune masks.
pub fn reset_last_layers<R: Rng + ?Sized>(
    net: &mut Network,
    k: usize,
    opt: &mut OptState,
    rng: &mut R,
) -> Result<()> {
    let n = net.layers().len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot reset {k} of {n} layers")));
    }
    for layer in n - k..n {
        net.resample_layer(layer, rng);
        opt.reset_layer(layer);
        if layer < n - 1 {
            net.clear_mask(layer);
        }
    }
    // A pruned neuron feeding the first reset layer must stay silent.
    if n - k >= 1 {
        let prev = n - k - 1;
        let pruned: Vec<usize> = (0..net.hidden_widths()[prev])
            .filter(|&i| net.is_pruned(prev, i))
            .collect();
        for i in pruned {
            net.layer_mut(n - k).weights.row_mut(i).fill(0.0);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, Matrix};
    use crate::rng::seeded;

    fn scores(v: &[f64]) -> Vec<LayerScores> {
        vec![LayerScores {
            scores: v.to_vec(),
            pruned: vec![false; v.len()],
        }]
    }

    fn net4() -> Network {
        Network::build(&LayerSpec::mlp(3, &[4], 2, Activation::Relu), 0).unwrap()
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_fraction(0, 100).unwrap(), 0.1);
        assert!(cosine_fraction(100, 100).unwrap().abs() < 1e-17);
        assert!((cosine_fraction(50, 100).unwrap() - 0.05).abs() < 1e-15);
        assert!(cosine_fraction(101, 100).is_err());
    }

    #[test]
    fn inverse_score_picks_highest() {
        let mut r = seeded(0, 0);
        let sel = select_for_recycling(
            &net4(),
            &scores(&[1.0, 0.0, 1.0, 2.0]),
            SelectionStrategy::InverseScore { fraction: 0.25 },
            &mut r,
        )
        .unwrap();
        assert_eq!(sel, vec![vec![3]]);
    }

    #[test]
    fn lowest_score_breaks_ties_low() {
        let mut r = seeded(0, 0);
        let sel = select_for_recycling(
            &net4(),
            &scores(&[1.0, 0.0, 1.0, 2.0]),
            SelectionStrategy::LowestScore { fraction: 0.5 },
            &mut r,
        )
        .unwrap();
        assert_eq!(sel, vec![vec![0, 1]]);
    }

    #[test]
    fn random_full_fraction_takes_everything_unpruned() {
        let mut r = seeded(0, 0);
        let mut ls = scores(&[1.0, 0.5, 1.0, 1.5]);
        ls[0].pruned[2] = true;
        let sel =
            select_for_recycling(&net4(), &ls, SelectionStrategy::Random { fraction: 1.0 }, &mut r)
                .unwrap();
        assert_eq!(sel, vec![vec![0, 1, 3]]);
    }

    #[test]
    fn utility_with_zero_outgoing_takes_first_indices() {
        let mut net = net4();
        net.layer_mut(1).weights = Matrix::zeros(4, 2);
        let mut r = seeded(0, 0);
        let sel = select_for_recycling(
            &net,
            &scores(&[3.0, 2.0, 1.0, 0.5]),
            SelectionStrategy::Utility { fraction: 0.5 },
            &mut r,
        )
        .unwrap();
        assert_eq!(sel, vec![vec![0, 1]]);
    }

    #[test]
    fn invalid_fraction_rejected() {
        let mut r = seeded(0, 0);
        assert!(select_for_recycling(
            &net4(),
            &scores(&[1.0]),
            SelectionStrategy::Random { fraction: 1.5 },
            &mut r
        )
        .is_err());
    }

    #[test]
    fn fraction_count_rounds_up_exactly() {
        assert_eq!(fraction_count(0.3, 10), 3);
        assert_eq!(fraction_count(0.25, 4), 1);
        assert_eq!(fraction_count(0.1, 64), 7);
        assert_eq!(fraction_count(0.0, 64), 0);
        assert_eq!(fraction_count(1.0, 5), 5);
    }

    #[test]
    fn norm_scaled_matches_mean_kept_norm() {
        let mut net = Network::build(&LayerSpec::mlp(5, &[6], 2, Activation::Relu), 4).unwrap();
        let mut opt = OptState::adam(&net, 1e-3, 1e-8).unwrap();
        let expected = [0, 1, 3, 4, 5].iter().map(|&i| net.incoming_norm(0, i)).sum::<f64>() / 5.0;
        let strategy = RecycleStrategy {
            incoming: IncomingInit::NormScaled,
            outgoing: OutgoingInit::RandomInit,
        };
        recycle_neurons(&mut net, &mut opt, &[vec![2]], strategy, &mut seeded(1, 1)).unwrap();
        assert!((net.incoming_norm(0, 2) - expected).abs() < 1e-12);
        assert!(net.layers()[1].weights.row(2).iter().any(|&w| w != 0.0));
    }

    #[test]
    fn reset_rejects_bad_k() {
        let mut net = net4();
        let mut opt = OptState::adam(&net, 1e-3, 1e-8).unwrap();
        let mut r = seeded(0, 0);
        assert!(reset_last_layers(&mut net, 0, &mut opt, &mut r).is_err());
        assert!(reset_last_layers(&mut net, 3, &mut opt, &mut r).is_err());
    }

    #[test]
    fn strategy_display() {
        assert_eq!(RecycleStrategy::default().to_string(), "reinit_original+zero");
    }
}
