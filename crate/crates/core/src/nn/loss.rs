use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LossKind {
    /// `mean(r²)` over all entries.
    Mse,
    /// `mean(½r²)` inside `|r| ≤ delta`, linear outside.
    Huber { delta: f64 },
    /// Softmax cross-entropy on logits; `target` is an `n × 1` column of class
    /// indices. Mean over rows.
    CrossEntropy,
}

/// Mean-reduced loss and its gradient with respect to `pred`.
pub fn loss_and_grad(kind: LossKind, pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    match kind {
        LossKind::Mse | LossKind::Huber { .. } => {
            if pred.shape() != target.shape() {
                return Err(shape_err(
                    "loss target",
                    format!("{:?}", pred.shape()),
                    format!("{:?}", target.shape()),
                ));
            }
            let n = pred.data().len().max(1) as f64;
            let mut grad = Matrix::zeros(pred.rows(), pred.cols());
            let mut loss = 0.0;
            for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
                let r = p - t;
                let (l, d) = match kind {
                    LossKind::Mse => (r * r, 2.0 * r),
                    LossKind::Huber { delta } => {
                        if r.abs() <= delta {
                            (0.5 * r * r, r)
                        } else {
                            (delta * (r.abs() - 0.5 * delta), delta * r.signum())
                        }
                    }
                    LossKind::CrossEntropy => unreachable!(),
                };
                loss += l;
                *g = d / n;
            }
            Ok((loss / n, grad))
        }
        LossKind::CrossEntropy => {
            if target.shape() != (pred.rows(), 1) {
                return Err(shape_err(
                    "cross-entropy target",
                    format!("({}, 1)", pred.rows()),
                    format!("{:?}", target.shape()),
                ));
            }
            let n = pred.rows().max(1) as f64;
            let k = pred.cols();
            let mut grad = Matrix::zeros(pred.rows(), k);
            let mut loss = 0.0;
            for r in 0..pred.rows() {
                let label = target.get(r, 0);
                if label < 0.0 || label.fract() != 0.0 || label as usize >= k {
                    return Err(Error::InvalidArgument(format!(
                        "class index {label} invalid for {k} classes"
                    )));
                }
                let label = label as usize;
                let logits = pred.row(r);
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                let log_norm = max + sum.ln();
                loss += log_norm - logits[label];
                for (c, g) in grad.row_mut(r).iter_mut().enumerate() {
                    let p = (logits[c] - log_norm).exp();
                    *g = (p - if c == label { 1.0 } else { 0.0 }) / n;
                }
            }
            Ok((loss / n, grad))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_at_target() {
        let p = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        let (l, g) = loss_and_grad(LossKind::Mse, &p, &p).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn huber_is_half_mse_inside_delta() {
        let p = Matrix::from_rows(&[[0.1, -0.4, 0.9]]).unwrap();
        let t = Matrix::zeros(1, 3);
        let (h, _) = loss_and_grad(LossKind::Huber { delta: 1.0 }, &p, &t).unwrap();
        let (m, _) = loss_and_grad(LossKind::Mse, &p, &t).unwrap();
        assert!((h - 0.5 * m).abs() < 1e-15);
    }

    #[test]
    fn huber_is_linear_outside_delta() {
        let p = Matrix::from_rows(&[[3.0]]).unwrap();
        let (h, g) = loss_and_grad(LossKind::Huber { delta: 1.0 }, &p, &Matrix::zeros(1, 1)).unwrap();
        assert_eq!(h, 2.5);
        assert_eq!(g.get(0, 0), 1.0);
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let p = Matrix::zeros(2, 3);
        let bad = Matrix::from_rows(&[[0.0], [3.0]]).unwrap();
        assert!(loss_and_grad(LossKind::CrossEntropy, &p, &bad).is_err());
        let frac = Matrix::from_rows(&[[0.5], [1.0]]).unwrap();
        assert!(loss_and_grad(LossKind::CrossEntropy, &p, &frac).is_err());
        let ok = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let (l, _) = loss_and_grad(LossKind::CrossEntropy, &p, &ok).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(loss_and_grad(LossKind::Mse, &Matrix::zeros(2, 2), &Matrix::zeros(2, 1)).is_err());
    }
}
