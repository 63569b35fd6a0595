use serde::{Deserialize, Serialize};

use super::{Gradients, Matrix, Network};
use crate::error::{Error, Result};

/// Adam epsilon used by the DQN defaults.
pub const DQN_ADAM_EPS: f64 = 1.5e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam(eps: f64) -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps,
        }
    }
}

/// Optimizer hyper-parameters plus per-parameter moment buffers.
///
/// Weight decay is decoupled and applied to weights only:
/// `w <- w * (1 - lr * wd)` before the gradient step.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    step: u64,
    // First moment (Adam) or velocity (SGD).
    m_w: Vec<Matrix>,
    m_b: Vec<Vec<f64>>,
    // Second moment, Adam only.
    v_w: Vec<Matrix>,
    v_b: Vec<Vec<f64>>,
}

impl OptState {
    pub fn new(net: &Network, kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if let OptimizerKind::Adam { eps, .. } = kind {
            if eps <= 0.0 {
                return Err(Error::InvalidArgument("adam eps must be positive".into()));
            }
        }
        if weight_decay < 0.0 || !weight_decay.is_finite() {
            return Err(Error::InvalidArgument(format!("weight decay {weight_decay} must be >= 0")));
        }
        let zeros = Gradients::zeros_like(net);
        let (v_w, v_b) = match kind {
            OptimizerKind::Adam { .. } => (zeros.weights.clone(), zeros.biases.clone()),
            OptimizerKind::Sgd { .. } => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            kind,
            learning_rate,
            weight_decay,
            step: 0,
            m_w: zeros.weights,
            m_b: zeros.biases,
            v_w,
            v_b,
        })
    }

    pub fn adam(net: &Network, learning_rate: f64, eps: f64) -> Result<Self> {
        Self::new(net, OptimizerKind::adam(eps), learning_rate, 0.0)
    }

    pub fn sgd(net: &Network, learning_rate: f64, momentum: f64) -> Result<Self> {
        Self::new(net, OptimizerKind::Sgd { momentum }, learning_rate, 0.0)
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to `net`. Parameters of pruned neurons are not touched.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if let Some(l) = grads.first_non_finite_layer() {
            return Err(Error::NonFinite(format!("gradient of layer {l}")));
        }
        if grads.weights.len() != net.layers().len() {
            return Err(crate::error::shape_err(
                "opt_step",
                net.layers().len(),
                grads.weights.len(),
            ));
        }
        self.step += 1;
        let lr = self.learning_rate;
        let decay = 1.0 - lr * self.weight_decay;
        let t = self.step as f64;
        let corr = match self.kind {
            OptimizerKind::Adam { beta1, beta2, .. } => (1.0 - beta1.powf(t), 1.0 - beta2.powf(t)),
            OptimizerKind::Sgd { .. } => (1.0, 1.0),
        };
        for l in 0..grads.weights.len() {
            let (rows, cols) = net.layers()[l].weights.shape();
            if grads.weights[l].shape() != (rows, cols) || grads.biases[l].len() != cols {
                return Err(crate::error::shape_err(
                    "opt_step layer",
                    format!("{rows}x{cols}"),
                    format!("{:?}", grads.weights[l].shape()),
                ));
            }
            let row_frozen: Vec<bool> = match l {
                0 => vec![false; rows],
                _ => net.masks()[l - 1].clone(),
            };
            let bias_frozen: Vec<bool> = (0..cols).map(|c| net.bias_frozen(l, c)).collect();
            let layer = net.layer_mut(l);
            for (r, &rf) in row_frozen.iter().enumerate() {
                for (c, &bf) in bias_frozen.iter().enumerate() {
                    if rf || bf {
                        continue;
                    }
                    let idx = r * cols + c;
                    let g = grads.weights[l].data()[idx];
                    let p = &mut layer.weights.data_mut()[idx];
                    if self.weight_decay != 0.0 {
                        *p *= decay;
                    }
                    *p -= lr * update(
                        self.kind,
                        corr,
                        &mut self.m_w[l].data_mut()[idx],
                        self.v_w.get_mut(l).map(|v| &mut v.data_mut()[idx]),
                        g,
                    );
                }
            }
            for c in 0..cols {
                if bias_frozen[c] {
                    continue;
                }
                let g = grads.biases[l][c];
                layer.bias[c] -= lr * update(
                    self.kind,
                    corr,
                    &mut self.m_b[l][c],
                    self.v_b.get_mut(l).map(|v| &mut v[c]),
                    g,
                );
            }
        }
        Ok(())
    }

    /// Zeroes the moments of the incoming weights and bias of `neuron` in `layer`.
    pub fn reset_incoming(&mut self, layer: usize, neuron: usize) {
        for buf in [&mut self.m_w, &mut self.v_w] {
            if let Some(w) = buf.get_mut(layer) {
                for r in 0..w.rows() {
                    w.set(r, neuron, 0.0);
                }
            }
        }
        for buf in [&mut self.m_b, &mut self.v_b] {
            if let Some(b) = buf.get_mut(layer) {
                b[neuron] = 0.0;
            }
        }
    }

    /// Zeroes the moments of row `row` of `layer`'s weights.
    pub fn reset_row(&mut self, layer: usize, row: usize) {
        for buf in [&mut self.m_w, &mut self.v_w] {
            if let Some(w) = buf.get_mut(layer) {
                w.row_mut(row).fill(0.0);
            }
        }
    }

    /// Zeroes every moment of `layer`.
    pub fn reset_layer(&mut self, layer: usize) {
        for buf in [&mut self.m_w, &mut self.v_w] {
            if let Some(w) = buf.get_mut(layer) {
                w.data_mut().fill(0.0);
            }
        }
        for buf in [&mut self.m_b, &mut self.v_b] {
            if let Some(b) = buf.get_mut(layer) {
                b.fill(0.0);
            }
        }
    }

    /// First-moment (or velocity) buffer for `layer`'s weights.
    pub fn first_moment(&self, layer: usize) -> &Matrix {
        &self.m_w[layer]
    }

    pub fn second_moment(&self, layer: usize) -> Option<&Matrix> {
        self.v_w.get(layer)
    }
}

#[inline]
fn update(kind: OptimizerKind, corr: (f64, f64), m: &mut f64, v: Option<&mut f64>, g: f64) -> f64 {
    match kind {
        OptimizerKind::Sgd { momentum } => {
            *m = momentum * *m + g;
            *m
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let v = v.expect("adam keeps second moments");
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / corr.0;
            let v_hat = *v / corr.1;
            m_hat / (v_hat.sqrt() + eps)
        }
    }
}
