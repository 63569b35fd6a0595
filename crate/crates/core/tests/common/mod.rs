#![allow(dead_code)]

use rand::Rng;
use redo_lab::nn::{Activation, LayerSpec, Matrix, Network};
use redo_lab::rng::{self, Rng as LabRng};

pub fn rng_for(seed: u64) -> LabRng {
    rng::seeded(seed, 1000)
}

pub fn random_matrix(r: &mut LabRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| r.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_activation(r: &mut LabRng) -> Activation {
    match r.random_range(0..3) {
        0 => Activation::Relu,
        1 => Activation::leaky_relu(),
        _ => Activation::Identity,
    }
}

/// An MLP with 1-3 hidden layers of random width.
pub fn random_net(r: &mut LabRng, act: Activation) -> Network {
    let input = r.random_range(1..6);
    let depth = r.random_range(1..4);
    let hidden: Vec<usize> = (0..depth).map(|_| r.random_range(2..9)).collect();
    let output = r.random_range(1..5);
    let mut net = Network::build(&LayerSpec::mlp(input, &hidden, output, act), r.random()).unwrap();
    // Non-zero biases so the bias path is exercised too.
    for l in 0..net.layers().len() {
        for b in net.layer_mut(l).bias.iter_mut() {
            *b = r.random_range(-0.3..0.3);
        }
    }
    net
}

/// Forces hidden neuron `i` of `layer` to output 0 for every input under relu.
pub fn kill_neuron(net: &mut Network, layer: usize, i: usize) {
    let l = net.layer_mut(layer);
    for r in 0..l.weights.rows() {
        l.weights.set(r, i, 0.0);
    }
    l.bias[i] = -1.0;
}

/// A relu net with a random subset of always-zero hidden neurons; returns
/// the net and the killed `(layer, neuron)` pairs (at least one).
pub fn net_with_dead_neurons(r: &mut LabRng) -> (Network, Vec<(usize, usize)>) {
    let mut net = random_net(r, Activation::Relu);
    let widths = net.hidden_widths();
    let mut dead = Vec::new();
    for (layer, &w) in widths.iter().enumerate() {
        for i in 0..w {
            if r.random::<f64>() < 0.3 {
                kill_neuron(&mut net, layer, i);
                dead.push((layer, i));
            }
        }
    }
    if dead.is_empty() {
        kill_neuron(&mut net, 0, 0);
        dead.push((0, 0));
    }
    (net, dead)
}
