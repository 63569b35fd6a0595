use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{shape_err, Error, Result};
use crate::nn::{Matrix, Network};
use crate::rng;

pub const DEFAULT_CLUSTER_NOISE: f64 = 0.5;

/// Classification dataset whose labels can be re-shuffled to create
/// non-stationary targets over fixed inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedTask {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Number of label shuffles applied so far.
    pub label_epoch: usize,
}

impl SupervisedTask {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels as an `n × 1` matrix of class indices (cross-entropy target).
    pub fn label_matrix(&self, indices: &[usize]) -> Matrix {
        let data = indices.iter().map(|&i| self.labels[i] as f64).collect();
        Matrix::from_vec(indices.len(), 1, data).expect("sized by construction")
    }

    /// Order-sensitive FNV-1a hash of the raw input bits.
    pub fn input_hash(&self) -> u64 {
        fnv1a(self.inputs.data().iter().flat_map(|v| v.to_bits().to_le_bytes()))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Balanced Gaussian clusters around unit-norm random class centres.
pub fn make_classification_task(
    n: usize,
    dim: usize,
    n_classes: usize,
    noise: f64,
    seed: u64,
) -> Result<SupervisedTask> {
    if n == 0 || dim == 0 || n_classes == 0 {
        return Err(Error::InvalidArgument(format!(
            "classification task needs positive sizes (n={n}, d={dim}, classes={n_classes})"
        )));
    }
    if !n.is_multiple_of(n_classes) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} is not divisible by {n_classes} classes"
        )));
    }
    if noise < 0.0 || !noise.is_finite() {
        return Err(Error::InvalidArgument(format!("noise {noise} must be >= 0")));
    }
    let mut r = rng::seeded(seed, rng::stream::TASK);
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    let mut data = Vec::with_capacity(n * dim);
    for &label in &labels {
        for &c in &centers[label] {
            let eps: f64 = StandardNormal.sample(&mut r);
            data.push(c + noise * eps);
        }
    }
    Ok(SupervisedTask {
        inputs: Matrix::from_vec(n, dim, data)?,
        labels,
        n_classes,
        label_epoch: 0,
    })
}

/// Replaces the labels by a seeded permutation of themselves.
pub fn shuffle_labels(task: &SupervisedTask, seed: u64) -> SupervisedTask {
    let mut r = rng::seeded(seed, rng::stream::SHUFFLE);
    let mut labels = task.labels.clone();
    labels.shuffle(&mut r);
    SupervisedTask {
        inputs: task.inputs.clone(),
        labels,
        n_classes: task.n_classes,
        label_epoch: task.label_epoch + 1,
    }
}

/// Regression inputs with targets produced once by a frozen teacher.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTask {
    pub inputs: Matrix,
    targets: Matrix,
}

impl RegressionTask {
    /// Targets are `teacher(inputs)`, computed now and never recomputed.
    pub fn from_teacher(inputs: Matrix, teacher: &Network) -> Result<Self> {
        if inputs.cols() != teacher.input_dim() {
            return Err(shape_err("regression teacher input", teacher.input_dim(), inputs.cols()));
        }
        let targets = teacher.predict(&inputs)?;
        Ok(Self { inputs, targets })
    }

    /// Random-teacher mode: a freshly initialised network built from `teacher`'s
    /// architecture with `teacher_seed`.
    pub fn random_teacher(
        inputs: Matrix,
        specs: &[crate::nn::LayerSpec],
        teacher_seed: u64,
    ) -> Result<Self> {
        let teacher = Network::build(specs, teacher_seed)?;
        Self::from_teacher(inputs, &teacher)
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}

/// Loads a classification dataset from CSV: a header row, `d` numeric feature
/// columns, and a final integer label column.
pub fn load_classification_csv(path: impl AsRef<Path>) -> Result<SupervisedTask> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let n_cols = reader.headers()?.len();
    if n_cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "dataset {} needs at least one feature column and a label column",
            path.display()
        )));
    }
    let dim = n_cols - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != n_cols {
            return Err(shape_err("dataset row", n_cols, rec.len()));
        }
        for f in rec.iter().take(dim) {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("row {}: feature `{f}` is not a number", i + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("dataset row {}", i + 1)));
            }
            data.push(v);
        }
        let label = rec[dim].trim();
        labels.push(label.parse::<usize>().map_err(|_| {
            Error::InvalidArgument(format!("row {}: label `{label}` is not a class index", i + 1))
        })?);
    }
    if labels.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok(SupervisedTask {
        inputs: Matrix::from_vec(labels.len(), dim, data)?,
        labels,
        n_classes,
        label_epoch: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};

    #[test]
    fn classes_are_balanced() {
        let t = make_classification_task(100, 8, 10, 0.5, 1).unwrap();
        assert_eq!(t.class_counts(), vec![10; 10]);
        assert_eq!(t.inputs.shape(), (100, 8));
    }

    #[test]
    fn same_seed_same_task() {
        assert_eq!(
            make_classification_task(60, 4, 3, 0.5, 9).unwrap(),
            make_classification_task(60, 4, 3, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn invalid_counts_rejected() {
        assert!(make_classification_task(101, 4, 10, 0.5, 0).is_err());
        assert!(make_classification_task(0, 4, 1, 0.5, 0).is_err());
    }

    #[test]
    fn shuffle_touches_only_labels() {
        let t = make_classification_task(200, 5, 4, 0.5, 3).unwrap();
        let s = shuffle_labels(&t, 17);
        assert_eq!(s.input_hash(), t.input_hash());
        assert_eq!(s.class_counts(), t.class_counts());
        assert_eq!(s.label_epoch, 1);
        assert_ne!(s.labels, t.labels);
    }

    #[test]
    fn single_sample_shuffle_is_identity() {
        let t = make_classification_task(1, 3, 1, 0.5, 3).unwrap();
        assert_eq!(shuffle_labels(&t, 5).labels, t.labels);
    }

    #[test]
    fn zero_gain_teacher_gives_zero_targets() {
        let mut specs = LayerSpec::mlp(3, &[4], 2, Activation::Relu);
        for s in &mut specs {
            s.init.gain = 0.0;
        }
        let x = make_classification_task(10, 3, 2, 0.5, 0).unwrap().inputs;
        let task = RegressionTask::random_teacher(x, &specs, 4).unwrap();
        assert!(task.targets().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn teacher_dimension_mismatch_rejected() {
        let teacher = Network::build(&LayerSpec::mlp(3, &[4], 2, Activation::Relu), 0).unwrap();
        assert!(RegressionTask::from_teacher(Matrix::zeros(2, 5), &teacher).is_err());
    }
}
