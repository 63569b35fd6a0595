//! Aggregate statistics across runs and feature-rank probes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Interquartile mean: sort, drop `floor(n/4)` values from each end, average
/// the rest. No interpolation, so for `n < 4` this is the plain mean.
pub fn iqm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("iqm input"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("iqm input".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = v.len() / 4;
    let kept = &v[cut..v.len() - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("mean input"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Aggregate used for a group of runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Iqm,
    Mean,
}

impl Statistic {
    pub fn apply(self, values: &[f64]) -> Result<f64> {
        match self {
            Statistic::Iqm => iqm(values),
            Statistic::Mean => mean(values),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Iqm => "iqm",
            Statistic::Mean => "mean",
        }
    }
}

/// Scores indexed by `(task, seed)`; each task is one bootstrap stratum.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMatrix {
    scores: Vec<Vec<f64>>,
}

impl RunMatrix {
    pub fn new(scores: Vec<Vec<f64>>) -> Result<Self> {
        if scores.is_empty() || scores.iter().any(Vec::is_empty) {
            return Err(Error::Empty("run matrix stratum"));
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("run matrix".into()));
        }
        Ok(Self { scores })
    }

    /// One task with the given per-seed scores.
    pub fn single_task(scores: Vec<f64>) -> Result<Self> {
        Self::new(vec![scores])
    }

    pub fn n_tasks(&self) -> usize {
        self.scores.len()
    }

    /// Largest seed count of any task.
    pub fn n_seeds(&self) -> usize {
        self.scores.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn task(&self, i: usize) -> &[f64] {
        &self.scores[i]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.scores.iter().flatten().copied().collect()
    }
}

/// Percentile bootstrap interval around a point statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    /// Set when some stratum holds a single seed, so resampling it cannot vary.
    pub degenerate: bool,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Stratified percentile bootstrap.
///
/// Each replicate resamples seeds with replacement inside every task, pools
/// the resampled scores and recomputes `statistic`. The interval is the
/// `[alpha/2, 1 - alpha/2]` percentile range of the `b` replicates.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    matrix: &RunMatrix,
    statistic: Statistic,
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    if b < 100 {
        return Err(Error::InvalidArgument(format!("bootstrap needs B >= 100, got {b}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let point = statistic.apply(&matrix.flatten())?;
    let degenerate = matrix.scores.iter().any(|s| s.len() == 1);
    let total: usize = matrix.scores.iter().map(Vec::len).sum();
    let mut pooled = Vec::with_capacity(total);
    let mut reps = Vec::with_capacity(b);
    for _ in 0..b {
        pooled.clear();
        for stratum in &matrix.scores {
            let n = stratum.len();
            pooled.extend((0..n).map(|_| stratum[rng.random_range(0..n)]));
        }
        reps.push(statistic.apply(&pooled)?);
    }
    reps.sort_by(f64::total_cmp);
    Ok(ConfidenceInterval {
        point,
        lo: quantile(&reps, alpha / 2.0),
        hi: quantile(&reps, 1.0 - alpha / 2.0),
        degenerate,
    })
}

/// The JSON aggregate written by the analysis step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub statistic: Statistic,
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_seeds: usize,
    pub n_tasks: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    pub degenerate: bool,
}

pub fn aggregate<R: Rng + ?Sized>(
    matrix: &RunMatrix,
    statistic: Statistic,
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<AggregateReport> {
    let ci = bootstrap_ci(matrix, statistic, b, alpha, rng)?;
    Ok(AggregateReport {
        statistic,
        point: ci.point,
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        n_seeds: matrix.n_seeds(),
        n_tasks: matrix.n_tasks(),
        b,
        alpha,
        degenerate: ci.degenerate,
    })
}

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Singular values in descending order, via one-sided Jacobi rotations.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("singular value input".into()));
    }
    let a = if a.rows() < a.cols() { a.transpose() } else { a.clone() };
    let (m, n) = a.shape();
    // Column-major copy: cols[j] is column j.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = (0..m).fold((0.0, 0.0, 0.0), |(x, y, z), i| {
                    let (up, uq) = (cols[p][i], cols[q][i]);
                    (x + up * up, y + uq * uq, z + up * uq)
                });
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                for i in 0..m {
                    let (up, uq) = (cp[i], cq[i]);
                    cp[i] = c * up - s * uq;
                    cq[i] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Effective rank (srank): the smallest `k` such that the top-`k` singular
/// values hold at least `1 - delta` of their total.
pub fn effective_rank(features: &Matrix, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
    }
    let sv = singular_values(features)?;
    let total: f64 = sv.iter().sum();
    if total == 0.0 {
        return Err(Error::InvalidArgument("effective rank of an all-zero matrix".into()));
    }
    let target = 1.0 - delta;
    let mut acc = 0.0;
    for (k, s) in sv.iter().enumerate() {
        acc += s;
        // Small slack so equal singular values land on the exact count.
        if acc / total >= target - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(sv.len())
}
