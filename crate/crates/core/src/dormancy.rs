//! Neuron dormancy scores, τ-dormant sets, the overlap coefficient and
//! permanent pruning.
//!
//! A hidden neuron's score is its batch-mean absolute activation divided by
//! the mean of that quantity over the (unpruned) neurons of its layer, so a
//! layer's scores average to one. A neuron is τ-dormant when its score is at
//! most τ. A layer whose activations are all exactly zero scores 0 everywhere.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::{ActivationTrace, Network};

/// Scores of one hidden layer together with its prune mask.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerScores {
    pub scores: Vec<f64>,
    pub pruned: Vec<bool>,
}

impl LayerScores {
    pub fn width(&self) -> usize {
        self.scores.len()
    }

    pub fn active_count(&self) -> usize {
        self.pruned.iter().filter(|&&p| !p).count()
    }

    /// Unpruned neurons with score ≤ `tau`.
    pub fn dormant(&self, tau: f64) -> Vec<usize> {
        dormant_set(&self.scores, tau)
            .into_iter()
            .filter(|&i| !self.pruned[i])
            .collect()
    }
}

/// Per-layer neuron scores for every hidden layer recorded in `trace`.
///
/// Pruned neurons are left out of the normalisation and score 0.
pub fn neuron_scores(trace: &ActivationTrace) -> Result<Vec<LayerScores>> {
    if trace.batch_size == 0 {
        return Err(Error::Empty("activation trace"));
    }
    Ok(trace
        .layers
        .iter()
        .enumerate()
        .map(|(l, acts)| {
            let width = acts.cols();
            let pruned = trace
                .pruned
                .get(l)
                .cloned()
                .unwrap_or_else(|| vec![false; width]);
            let mut means = vec![0.0; width];
            for r in 0..acts.rows() {
                for (m, a) in means.iter_mut().zip(acts.row(r)) {
                    *m += a.abs();
                }
            }
            let n = acts.rows() as f64;
            for m in &mut means {
                *m /= n;
            }
            let active = pruned.iter().filter(|&&p| !p).count();
            let layer_mean = if active == 0 {
                0.0
            } else {
                means
                    .iter()
                    .zip(&pruned)
                    .filter(|(_, &p)| !p)
                    .map(|(m, _)| m)
                    .sum::<f64>()
                    / active as f64
            };
            let scores = means
                .iter()
                .zip(&pruned)
                .map(|(&m, &p)| {
                    if p || layer_mean == 0.0 {
                        0.0
                    } else {
                        m / layer_mean
                    }
                })
                .collect();
            LayerScores { scores, pruned }
        })
        .collect())
}

/// `{ i : scores[i] ≤ tau }`.
pub fn dormant_set(scores: &[f64], tau: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tau)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerDormancy {
    pub scores: Vec<f64>,
    pub dormant: Vec<usize>,
    /// Unpruned neurons in the layer.
    pub active: usize,
    pub fraction: f64,
}

/// Dormancy of every hidden layer at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DormancyReport {
    pub tau: f64,
    pub layers: Vec<LayerDormancy>,
    pub batch_id: u64,
}

impl DormancyReport {
    pub fn new(scores: &[LayerScores], tau: f64, batch_id: u64) -> Self {
        let layers = scores
            .iter()
            .map(|s| {
                let dormant = s.dormant(tau);
                let active = s.active_count();
                let fraction = if active == 0 {
                    0.0
                } else {
                    dormant.len() as f64 / active as f64
                };
                LayerDormancy {
                    scores: s.scores.clone(),
                    dormant,
                    active,
                    fraction,
                }
            })
            .collect();
        Self {
            tau,
            layers,
            batch_id,
        }
    }

    pub fn from_trace(trace: &ActivationTrace, tau: f64) -> Result<Self> {
        Ok(Self::new(&neuron_scores(trace)?, tau, 0))
    }

    pub fn dormant_count(&self) -> usize {
        self.layers.iter().map(|l| l.dormant.len()).sum()
    }

    pub fn dormant_sets(&self) -> Vec<Vec<usize>> {
        self.layers.iter().map(|l| l.dormant.clone()).collect()
    }

    pub fn fraction(&self) -> Result<f64> {
        dormant_fraction(self)
    }
}

/// Dormant hidden neurons over unpruned hidden neurons, across all layers.
pub fn dormant_fraction(report: &DormancyReport) -> Result<f64> {
    let total: usize = report.layers.iter().map(|l| l.active).sum();
    if total == 0 {
        return Err(Error::Empty("set of unpruned hidden neurons"));
    }
    Ok(report.dormant_count() as f64 / total as f64)
}

/// `|X ∩ Y| / min(|X|, |Y|)`; `None` when either set is empty.
pub fn overlap_coefficient(x: &BTreeSet<usize>, y: &BTreeSet<usize>) -> Option<f64> {
    let denom = x.len().min(y.len());
    if denom == 0 {
        return None;
    }
    Some(x.intersection(y).count() as f64 / denom as f64)
}

/// Overlap of the current dormant set with two notions of history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapSample {
    pub vs_first: Option<f64>,
    pub vs_union: Option<f64>,
}

/// Tracks how persistently neurons of one layer stay dormant.
///
/// Each update compares the current set against the first non-empty snapshot
/// and against the union of all earlier snapshots.
#[derive(Clone, Debug, Default)]
pub struct OverlapTracker {
    pub layer: usize,
    first: Option<BTreeSet<usize>>,
    union: BTreeSet<usize>,
    pub series: Vec<OverlapSample>,
}

impl OverlapTracker {
    pub fn new(layer: usize) -> Self {
        Self {
            layer,
            ..Default::default()
        }
    }

    pub fn update(&mut self, current: &[usize]) -> OverlapSample {
        let current: BTreeSet<usize> = current.iter().copied().collect();
        let sample = OverlapSample {
            vs_first: self
                .first
                .as_ref()
                .and_then(|f| overlap_coefficient(&current, f)),
            vs_union: overlap_coefficient(&current, &self.union),
        };
        if self.first.is_none() && !current.is_empty() {
            self.first = Some(current.clone());
        }
        self.union.extend(current);
        self.series.push(sample);
        sample
    }
}

/// Permanently prunes the listed neurons of each hidden layer.
pub fn prune_dormant(net: &mut Network, dormant: &[Vec<usize>]) -> Result<usize> {
    if dormant.len() > net.num_hidden_layers() {
        return Err(Error::InvalidArgument(format!(
            "{} index sets for {} hidden layers",
            dormant.len(),
            net.num_hidden_layers()
        )));
    }
    let mut count = 0;
    for (layer, set) in dormant.iter().enumerate() {
        for &i in set {
            if i >= net.hidden_widths()[layer] {
                return Err(Error::InvalidArgument(format!(
                    "neuron {i} out of range in hidden layer {layer}"
                )));
            }
        }
        for &i in set {
            if !net.is_pruned(layer, i) {
                net.prune(layer, i)?;
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    fn trace_from_means(means: &[f64]) -> ActivationTrace {
        ActivationTrace {
            batch_size: 1,
            layers: vec![Matrix::row_vector(means)],
            pruned: vec![vec![false; means.len()]],
        }
    }

    #[test]
    fn scores_normalise_by_layer_mean() {
        let s = neuron_scores(&trace_from_means(&[2.0, 0.0, 2.0, 4.0])).unwrap();
        assert_eq!(s[0].scores, vec![1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn constant_and_zero_layers() {
        let s = neuron_scores(&trace_from_means(&[0.7; 5])).unwrap();
        assert!(s[0].scores.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let z = neuron_scores(&trace_from_means(&[0.0; 3])).unwrap();
        assert_eq!(z[0].scores, vec![0.0; 3]);
        assert_eq!(z[0].dormant(0.0), vec![0, 1, 2]);
    }

    #[test]
    fn negative_activations_use_absolute_value() {
        let t = ActivationTrace {
            batch_size: 2,
            layers: vec![Matrix::from_rows(&[[-1.0, 3.0], [1.0, -3.0]]).unwrap()],
            pruned: vec![vec![false, false]],
        };
        assert_eq!(neuron_scores(&t).unwrap()[0].scores, vec![0.5, 1.5]);
    }

    #[test]
    fn empty_trace_is_error() {
        let t = ActivationTrace {
            batch_size: 0,
            layers: vec![],
            pruned: vec![],
        };
        assert!(neuron_scores(&t).is_err());
    }

    #[test]
    fn thresholding() {
        let s = [1.0, 0.0, 1.0, 2.0];
        assert_eq!(dormant_set(&s, 0.0), vec![1]);
        assert_eq!(dormant_set(&s, 0.1), vec![1]);
        assert_eq!(dormant_set(&s, 2.0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn pruned_neurons_are_not_dormant_candidates() {
        let t = ActivationTrace {
            batch_size: 1,
            layers: vec![Matrix::row_vector(&[0.0, 0.0, 3.0, 1.0])],
            pruned: vec![vec![true, false, false, false]],
        };
        let s = neuron_scores(&t).unwrap();
        assert_eq!(s[0].scores, vec![0.0, 0.0, 2.25, 0.75]);
        assert_eq!(s[0].dormant(0.0), vec![1]);
        let report = DormancyReport::new(&s, 0.0, 0);
        assert_eq!(report.layers[0].active, 3);
        assert!((report.fraction().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fraction_counts() {
        let mut scores = vec![1.0; 12];
        scores[0] = 0.0;
        scores[5] = 0.0;
        scores[11] = 0.0;
        let ls = LayerScores {
            scores,
            pruned: vec![false; 12],
        };
        let r = DormancyReport::new(std::slice::from_ref(&ls), 0.0, 0);
        assert_eq!(dormant_fraction(&r).unwrap(), 0.25);
        assert_eq!(DormancyReport::new(std::slice::from_ref(&ls), 5.0, 0).fraction().unwrap(), 1.0);
        assert_eq!(DormancyReport::new(&[ls], -1.0, 0).fraction().unwrap(), 0.0);
        let none = DormancyReport::new(&[], 0.0, 0);
        assert!(dormant_fraction(&none).is_err());
    }

    #[test]
    fn overlap_values() {
        let a: BTreeSet<usize> = [1, 2].into();
        let b: BTreeSet<usize> = [2, 3].into();
        assert_eq!(overlap_coefficient(&a, &b), Some(0.5));
        assert_eq!(overlap_coefficient(&a, &a), Some(1.0));
        assert_eq!(overlap_coefficient(&a, &[7, 8].into()), Some(0.0));
        assert_eq!(overlap_coefficient(&a, &BTreeSet::new()), None);
    }

    #[test]
    fn tracker_history_variants() {
        let mut t = OverlapTracker::new(0);
        let s0 = t.update(&[]);
        assert_eq!(s0.vs_union, None);
        t.update(&[1, 2]);
        let s = t.update(&[2, 3, 4]);
        assert_eq!(s.vs_first, Some(0.5));
        assert_eq!(s.vs_union, Some(0.5));
        let s = t.update(&[3, 4]);
        assert_eq!(s.vs_first, Some(0.0));
        assert_eq!(s.vs_union, Some(1.0));
        assert_eq!(t.series.len(), 4);
    }
}
