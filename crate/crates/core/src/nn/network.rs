use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{shape_err, Error, Result};
use crate::rng;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Identity,
}

impl Activation {
    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`; the kink at 0 takes the left slope.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    ScaledUniform,
}

/// The distribution a layer's weights were drawn from.
///
/// Weights follow `Uniform(-L, L)` with `L = gain * sqrt(3 / in_dim)`;
/// biases start at zero. It is stored with the layer so recycled
/// neurons can be re-drawn from the same distribution later.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub kind: InitKind,
    pub gain: f64,
    pub stream: u64,
}

impl InitSpec {
    pub fn scaled_uniform(gain: f64, stream: u64) -> Self {
        Self {
            kind: InitKind::ScaledUniform,
            gain,
            stream,
        }
    }

    pub fn limit(&self, in_dim: usize) -> f64 {
        self.gain * (3.0 / in_dim as f64).sqrt()
    }

    pub fn sample_weight<R: Rng + ?Sized>(&self, in_dim: usize, rng: &mut R) -> f64 {
        let limit = self.limit(in_dim);
        if limit == 0.0 {
            return 0.0;
        }
        rng.random_range(-limit..limit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub init: InitSpec,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, init: InitSpec) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            init,
        }
    }

    /// Multi-layer perceptron: `hidden_act` on every hidden layer, identity on
    /// the output, gain 1 everywhere and one init stream per layer.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, hidden_act: Activation) -> Vec<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        let last = dims.len() - 2;
        dims.windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    hidden_act
                };
                LayerSpec::new(w[0], w[1], act, InitSpec::scaled_uniform(1.0, i as u64))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `in_dim × out_dim`; column `j` holds the incoming weights of neuron `j`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Dense feed-forward network with permanent prune masks on hidden neurons.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    /// One mask per hidden layer (every layer but the last); `true` = pruned.
    masks: Vec<Vec<bool>>,
}

/// Post-activation values of every hidden layer for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTrace {
    pub batch_size: usize,
    pub layers: Vec<Matrix>,
    pub pruned: Vec<Vec<bool>>,
}

/// Intermediate values kept by a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("network has at least one layer")
    }

    pub fn into_parts(mut self, pruned: Vec<Vec<bool>>) -> (Matrix, ActivationTrace) {
        let out = self.post.pop().expect("network has at least one layer");
        let trace = ActivationTrace {
            batch_size: self.input.rows(),
            layers: self.post,
            pruned,
        };
        (out, trace)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.spec.in_dim, l.spec.out_dim))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.spec.out_dim]).collect(),
        }
    }

    /// Index of the first layer holding a non-finite entry, if any.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        (0..self.weights.len()).find(|&l| {
            !self.weights[l].is_finite() || self.biases[l].iter().any(|v| !v.is_finite())
        })
    }
}

impl Network {
    /// Builds a network, drawing each layer's weights from its [`InitSpec`].
    pub fn build(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Empty("layer spec list"));
        }
        for (i, s) in specs.iter().enumerate() {
            if s.in_dim == 0 || s.out_dim == 0 {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} has a zero dimension ({}x{})",
                    s.in_dim, s.out_dim
                )));
            }
        }
        for (i, w) in specs.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(shape_err(
                    "build_network layer chain",
                    format!("layer {} in_dim = {}", i + 1, w[0].out_dim),
                    w[1].in_dim,
                ));
            }
        }
        let layers = specs
            .iter()
            .map(|spec| {
                let mut r = rng::seeded(seed, spec.init.stream);
                Layer {
                    spec: *spec,
                    weights: sample_matrix(spec, &mut r),
                    bias: vec![0.0; spec.out_dim],
                }
            })
            .collect();
        let masks = specs[..specs.len() - 1]
            .iter()
            .map(|s| vec![false; s.out_dim])
            .collect();
        Ok(Self { layers, masks })
    }

    /// Assembles a network from explicit parameters (checkpoint loading, tests).
    pub fn from_parts(layers: Vec<Layer>, masks: Vec<Vec<bool>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layer list"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.shape() != (l.spec.in_dim, l.spec.out_dim) || l.bias.len() != l.spec.out_dim {
                return Err(shape_err(
                    "Network::from_parts",
                    format!("layer {i} {}x{}", l.spec.in_dim, l.spec.out_dim),
                    format!("{:?} / bias {}", l.weights.shape(), l.bias.len()),
                ));
            }
        }
        for w in layers.windows(2) {
            if w[0].spec.out_dim != w[1].spec.in_dim {
                return Err(shape_err(
                    "Network::from_parts chain",
                    w[0].spec.out_dim,
                    w[1].spec.in_dim,
                ));
            }
        }
        if masks.len() != layers.len() - 1
            || masks.iter().zip(&layers).any(|(m, l)| m.len() != l.spec.out_dim)
        {
            return Err(shape_err(
                "Network::from_parts masks",
                "one mask per hidden layer",
                masks.len(),
            ));
        }
        Ok(Self { layers, masks })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, idx: usize) -> &mut Layer {
        &mut self.layers[idx]
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.masks.iter().map(Vec::len).collect()
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn is_pruned(&self, hidden_layer: usize, neuron: usize) -> bool {
        self.masks[hidden_layer][neuron]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.spec.in_dim * l.spec.out_dim + l.spec.out_dim)
            .sum()
    }

    /// Copies all parameters and masks from `other` (same architecture).
    pub fn copy_from(&mut self, other: &Network) {
        self.clone_from(other);
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        if batch.cols() != self.input_dim() {
            return Err(shape_err("forward input", self.input_dim(), batch.cols()));
        }
        if !batch.is_finite() {
            return Err(Error::NonFinite("forward input batch".into()));
        }
        let n_layers = self.layers.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post: Vec<Matrix> = Vec::with_capacity(n_layers);
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { batch } else { &post[l - 1] };
            let mut z = input.matmul(&layer.weights)?;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let act = layer.spec.activation;
            let mut h = z.map(|v| act.apply(v));
            if let Some(mask) = self.masks.get(l) {
                if mask.iter().any(|&m| m) {
                    for r in 0..h.rows() {
                        for (v, &m) in h.row_mut(r).iter_mut().zip(mask) {
                            if m {
                                *v = 0.0;
                            }
                        }
                    }
                }
            }
            pre.push(z);
            post.push(h);
        }
        Ok(ForwardCache {
            input: batch.clone(),
            pre,
            post,
        })
    }

    /// Forward pass returning outputs and the hidden-layer activation trace.
    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ActivationTrace)> {
        Ok(self.forward_cached(batch)?.into_parts(self.masks.clone()))
    }

    /// Forward pass that only returns the outputs.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut cache = self.forward_cached(batch)?;
        Ok(cache.post.pop().expect("non-empty"))
    }

    /// Output for a single observation.
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Matrix::row_vector(x))?.into_vec())
    }

    /// Gradients of `sum(loss_grad ⊙ outputs)` with respect to every parameter.
    pub fn backward(&self, batch: &Matrix, loss_grad: &Matrix) -> Result<Gradients> {
        let cache = self.forward_cached(batch)?;
        self.backward_cached(&cache, loss_grad)
    }

    pub fn backward_cached(&self, cache: &ForwardCache, loss_grad: &Matrix) -> Result<Gradients> {
        let out_shape = cache.output().shape();
        if loss_grad.shape() != out_shape {
            return Err(shape_err(
                "backward loss_grad",
                format!("{out_shape:?}"),
                format!("{:?}", loss_grad.shape()),
            ));
        }
        let n_layers = self.layers.len();
        let mut weights = vec![Matrix::zeros(0, 0); n_layers];
        let mut biases = vec![Vec::new(); n_layers];

        let mut delta = loss_grad.clone();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let act = layer.spec.activation;
            // Through the activation.
            {
                let z = &cache.pre[l];
                let mask = self.masks.get(l);
                for r in 0..delta.rows() {
                    let zr = z.row(r);
                    for (c, d) in delta.row_mut(r).iter_mut().enumerate() {
                        let pruned = mask.is_some_and(|m| m[c]);
                        *d = if pruned { 0.0 } else { *d * act.derivative(zr[c]) };
                    }
                }
            }
            let input = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let dw = input.t_matmul(&delta)?;
            let mut db = vec![0.0; layer.spec.out_dim];
            for r in 0..delta.rows() {
                for (b, d) in db.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            if l > 0 {
                delta = delta.matmul_t(&layer.weights)?;
            }
            weights[l] = dw;
            biases[l] = db;
        }
        let mut grads = Gradients { weights, biases };
        self.zero_masked(&mut grads);
        Ok(grads)
    }

    fn zero_masked(&self, grads: &mut Gradients) {
        for (h, mask) in self.masks.iter().enumerate() {
            for (j, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                let w_in = &mut grads.weights[h];
                for r in 0..w_in.rows() {
                    w_in.set(r, j, 0.0);
                }
                grads.biases[h][j] = 0.0;
                grads.weights[h + 1].row_mut(j).fill(0.0);
            }
        }
    }

    /// Whether the weight at `(row, col)` of `layer` belongs to a pruned neuron.
    #[inline]
    pub fn weight_frozen(&self, layer: usize, row: usize, col: usize) -> bool {
        (layer > 0 && self.masks[layer - 1][row])
            || self.masks.get(layer).is_some_and(|m| m[col])
    }

    #[inline]
    pub fn bias_frozen(&self, layer: usize, idx: usize) -> bool {
        self.masks.get(layer).is_some_and(|m| m[idx])
    }

    /// Permanently prunes hidden neuron `neuron` of hidden layer `hidden_layer`:
    /// its mask is set and its outgoing weights are zeroed.
    pub fn prune(&mut self, hidden_layer: usize, neuron: usize) -> Result<()> {
        let width = self
            .masks
            .get(hidden_layer)
            .ok_or_else(|| Error::InvalidArgument(format!("no hidden layer {hidden_layer}")))?
            .len();
        if neuron >= width {
            return Err(Error::InvalidArgument(format!(
                "neuron {neuron} out of range for hidden layer {hidden_layer} of width {width}"
            )));
        }
        self.masks[hidden_layer][neuron] = true;
        self.layers[hidden_layer + 1].weights.row_mut(neuron).fill(0.0);
        Ok(())
    }

    pub(crate) fn clear_mask(&mut self, hidden_layer: usize) {
        self.masks[hidden_layer].fill(false);
    }

    /// Re-draws the incoming weights of `neuron` in `layer` from the layer's
    /// stored init distribution and zeroes its bias.
    pub fn resample_incoming<R: Rng + ?Sized>(&mut self, layer: usize, neuron: usize, rng: &mut R) {
        let l = &mut self.layers[layer];
        let (in_dim, init) = (l.spec.in_dim, l.spec.init);
        for r in 0..in_dim {
            let w = init.sample_weight(in_dim, rng);
            l.weights.set(r, neuron, w);
        }
        l.bias[neuron] = 0.0;
    }

    /// Re-draws row `neuron` of `layer`'s weights (the outgoing weights of
    /// neuron `neuron` in the previous layer).
    pub fn resample_row<R: Rng + ?Sized>(&mut self, layer: usize, neuron: usize, rng: &mut R) {
        let l = &mut self.layers[layer];
        let (in_dim, init) = (l.spec.in_dim, l.spec.init);
        for w in l.weights.row_mut(neuron) {
            *w = init.sample_weight(in_dim, rng);
        }
    }

    /// Re-draws every parameter of `layer` from its init distribution.
    pub fn resample_layer<R: Rng + ?Sized>(&mut self, layer: usize, rng: &mut R) {
        let l = &mut self.layers[layer];
        l.weights = sample_matrix(&l.spec, rng);
        l.bias.fill(0.0);
    }

    /// L2 norm of the incoming weight column of `neuron` in `layer`.
    pub fn incoming_norm(&self, layer: usize, neuron: usize) -> f64 {
        let w = &self.layers[layer].weights;
        (0..w.rows()).map(|r| w.get(r, neuron).powi(2)).sum::<f64>().sqrt()
    }

    /// L1 norm of the outgoing weights of hidden neuron `neuron` in `hidden_layer`.
    pub fn outgoing_l1(&self, hidden_layer: usize, neuron: usize) -> f64 {
        self.layers[hidden_layer + 1]
            .weights
            .row(neuron)
            .iter()
            .map(|w| w.abs())
            .sum()
    }
}

fn sample_matrix<R: Rng + ?Sized>(spec: &LayerSpec, rng: &mut R) -> Matrix {
    let data = (0..spec.in_dim * spec.out_dim)
        .map(|_| spec.init.sample_weight(spec.in_dim, rng))
        .collect();
    Matrix::from_vec(spec.in_dim, spec.out_dim, data).expect("sized by construction")
}
