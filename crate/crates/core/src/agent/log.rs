use serde::{Deserialize, Serialize};

/// One logged measurement; one row per finished episode (or epoch, or
/// logging interval for offline runs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step_env: u64,
    pub step_grad: u64,
    pub episode: u64,
    #[serde(rename = "return")]
    pub episode_return: Option<f64>,
    pub loss: Option<f64>,
    pub dormant_frac_tau0: Option<f64>,
    pub dormant_frac_tau: Option<f64>,
    pub recycled_count: u64,
    pub seed: u64,
}

/// One row per (step, hidden layer, τ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DormancyRow {
    pub step_grad: u64,
    pub layer: usize,
    pub tau: f64,
    pub dormant_count: usize,
    pub layer_size: usize,
    pub dormant_fraction: f64,
    /// Overlap with the union of all earlier dormant sets of this layer.
    pub overlap: Option<f64>,
}

/// Both overlap variants for one (step, layer, τ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub step_grad: u64,
    pub layer: usize,
    pub tau: f64,
    pub overlap_first: Option<f64>,
    pub overlap_union: Option<f64>,
}

/// One row per recycling event and layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecycleRow {
    pub step_grad: u64,
    pub layer: usize,
    pub n_recycled: usize,
    pub strategy: String,
    pub tau_or_fraction: f64,
}

/// Greedy evaluation around a pruning pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRow {
    pub step_grad: u64,
    pub pruned_now: usize,
    pub pruned_total: usize,
    pub return_before: f64,
    pub return_after: f64,
}

/// Everything a run logs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricSeries {
    pub rows: Vec<MetricRow>,
    pub dormancy: Vec<DormancyRow>,
    pub overlap: Vec<OverlapRow>,
    pub recycle: Vec<RecycleRow>,
    pub prune: Vec<PruneRow>,
}

impl MetricSeries {
    /// Mean return over the last `window` rows that carry a return.
    pub fn final_return(&self, window: usize) -> Option<f64> {
        let returns: Vec<f64> = self.rows.iter().filter_map(|r| r.episode_return).collect();
        if returns.is_empty() || window == 0 {
            return None;
        }
        let tail = &returns[returns.len().saturating_sub(window)..];
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// Overall dormant fraction at `tau` at the last measured step.
    pub fn final_dormant_fraction(&self, tau: f64) -> Option<f64> {
        let last = self
            .dormancy
            .iter()
            .filter(|r| r.tau == tau)
            .map(|r| r.step_grad)
            .max()?;
        let (d, n) = self
            .dormancy
            .iter()
            .filter(|r| r.tau == tau && r.step_grad == last)
            .fold((0, 0), |(d, n), r| (d + r.dormant_count, n + r.layer_size));
        (n > 0).then(|| d as f64 / n as f64)
    }

    /// `(step_grad, overall fraction)` at every measurement of `tau`.
    pub fn dormant_trajectory(&self, tau: f64) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, usize, usize)> = Vec::new();
        for r in self.dormancy.iter().filter(|r| r.tau == tau) {
            match out.last_mut() {
                Some(last) if last.0 == r.step_grad => {
                    last.1 += r.dormant_count;
                    last.2 += r.layer_size;
                }
                _ => out.push((r.step_grad, r.dormant_count, r.layer_size)),
            }
        }
        out.into_iter()
            .filter(|&(_, _, n)| n > 0)
            .map(|(s, d, n)| (s, d as f64 / n as f64))
            .collect()
    }
}

/// Mutable state hooks write into during a run.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub series: MetricSeries,
    pub last_frac_tau0: Option<f64>,
    pub last_frac_tau: Option<f64>,
    pub recycled_total: u64,
}
