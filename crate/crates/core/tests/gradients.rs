//! Backprop against central finite differences.

mod common;

use common::*;
use rand::Rng;
use redo_lab::agent::td_loss_and_grad;
use redo_lab::nn::{loss_and_grad, Activation, LossKind, Matrix, Network};

#[derive(Clone, Copy, Debug)]
enum Objective {
    Loss(LossKind),
    Td { delta: f64 },
}

struct Problem {
    x: Matrix,
    y: Matrix,
    actions: Vec<usize>,
    targets: Vec<f64>,
    objective: Objective,
}

impl Problem {
    fn new(r: &mut redo_lab::rng::Rng, net: &Network, objective: Objective) -> Self {
        let n = r.random_range(2..6);
        let x = random_matrix(r, n, net.input_dim(), 1.0);
        let k = net.output_dim();
        let y = match objective {
            Objective::Loss(LossKind::CrossEntropy) => {
                let labels = (0..n).map(|_| r.random_range(0..k) as f64).collect();
                Matrix::from_vec(n, 1, labels).unwrap()
            }
            _ => random_matrix(r, n, k, 2.0),
        };
        let actions = (0..n).map(|_| r.random_range(0..k)).collect();
        let targets = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        Self {
            x,
            y,
            actions,
            targets,
            objective,
        }
    }

    fn eval(&self, pred: &Matrix) -> (f64, Matrix) {
        match self.objective {
            Objective::Loss(kind) => loss_and_grad(kind, pred, &self.y).unwrap(),
            Objective::Td { delta } => td_loss_and_grad(pred, &self.actions, &self.targets, delta).unwrap(),
        }
    }

    fn loss(&self, net: &Network) -> f64 {
        let pred = net.predict(&self.x).unwrap();
        self.eval(&pred).0
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

/// Checks `count` random parameters of random problems; returns the worst error.
fn check_random_parameters(count: usize, seed: u64, h: f64) -> f64 {
    let mut r = rng_for(seed);
    let objectives = [
        Objective::Loss(LossKind::Mse),
        Objective::Loss(LossKind::Huber { delta: 1.0 }),
        Objective::Loss(LossKind::CrossEntropy),
        Objective::Td { delta: 1.0 },
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < count {
        let act = random_activation(&mut r);
        let mut net = random_net(&mut r, act);
        let obj = objectives[r.random_range(0..objectives.len())];
        let p = Problem::new(&mut r, &net, obj);
        let cache = net.forward_cached(&p.x).unwrap();
        let (_, g) = p.eval(cache.output());
        let grads = net.backward_cached(&cache, &g).unwrap();
        for _ in 0..5 {
            let layer = r.random_range(0..net.layers().len());
            let (rows, cols) = net.layers()[layer].weights.shape();
            let use_bias = r.random::<f64>() < 0.25;
            let (analytic, numeric) = if use_bias {
                let c = r.random_range(0..cols);
                let orig = net.layers()[layer].bias[c];
                net.layer_mut(layer).bias[c] = orig + h;
                let up = p.loss(&net);
                net.layer_mut(layer).bias[c] = orig - h;
                let down = p.loss(&net);
                net.layer_mut(layer).bias[c] = orig;
                (grads.biases[layer][c], (up - down) / (2.0 * h))
            } else {
                let (i, j) = (r.random_range(0..rows), r.random_range(0..cols));
                let orig = net.layers()[layer].weights.get(i, j);
                net.layer_mut(layer).weights.set(i, j, orig + h);
                let up = p.loss(&net);
                net.layer_mut(layer).weights.set(i, j, orig - h);
                let down = p.loss(&net);
                net.layer_mut(layer).weights.set(i, j, orig);
                (grads.weights[layer].get(i, j), (up - down) / (2.0 * h))
            };
            worst = worst.max(rel_err(analytic, numeric));
            checked += 1;
        }
    }
    worst
}

#[test]
fn random_parameters_match_finite_differences() {
    let worst = check_random_parameters(200, 3, 1e-5);
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn every_activation_and_loss_is_covered() {
    for (i, act) in [Activation::Relu, Activation::leaky_relu(), Activation::Identity].into_iter().enumerate() {
        for (j, kind) in [LossKind::Mse, LossKind::Huber { delta: 0.5 }, LossKind::CrossEntropy]
            .into_iter()
            .enumerate()
        {
            let mut r = rng_for(100 + 10 * i as u64 + j as u64);
            let mut net = random_net(&mut r, act);
            let p = Problem::new(&mut r, &net, Objective::Loss(kind));
            let cache = net.forward_cached(&p.x).unwrap();
            let (_, g) = p.eval(cache.output());
            let grads = net.backward_cached(&cache, &g).unwrap();
            let h = 1e-5;
            for l in 0..net.layers().len() {
                let (rows, cols) = net.layers()[l].weights.shape();
                for a in 0..rows {
                    for b in 0..cols {
                        let orig = net.layers()[l].weights.get(a, b);
                        net.layer_mut(l).weights.set(a, b, orig + h);
                        let up = p.loss(&net);
                        net.layer_mut(l).weights.set(a, b, orig - h);
                        let down = p.loss(&net);
                        net.layer_mut(l).weights.set(a, b, orig);
                        let e = rel_err(grads.weights[l].get(a, b), (up - down) / (2.0 * h));
                        assert!(e < 1e-5, "{act:?} {kind:?} layer {l} ({a},{b}): {e:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut r = rng_for(7);
    for kind in [LossKind::Mse, LossKind::Huber { delta: 0.7 }, LossKind::CrossEntropy] {
        for _ in 0..20 {
            let (n, k) = (r.random_range(1..5), r.random_range(2..5));
            let pred = random_matrix(&mut r, n, k, 2.0);
            let target = match kind {
                LossKind::CrossEntropy => {
                    Matrix::from_vec(n, 1, (0..n).map(|_| r.random_range(0..k) as f64).collect()).unwrap()
                }
                _ => random_matrix(&mut r, n, k, 2.0),
            };
            let (_, g) = loss_and_grad(kind, &pred, &target).unwrap();
            let h = 1e-6;
            for idx in 0..n * k {
                let mut up = pred.clone();
                up.data_mut()[idx] += h;
                let mut down = pred.clone();
                down.data_mut()[idx] -= h;
                let num = (loss_and_grad(kind, &up, &target).unwrap().0
                    - loss_and_grad(kind, &down, &target).unwrap().0)
                    / (2.0 * h);
                let e = rel_err(g.data()[idx], num);
                assert!(e < 1e-6, "{kind:?}: {e:e}");
            }
        }
    }
}

#[test]
fn pruned_neurons_get_zero_gradient() {
    let mut r = rng_for(11);
    let mut net = random_net(&mut r, Activation::Relu);
    net.prune(0, 1).unwrap();
    let x = random_matrix(&mut r, 4, net.input_dim(), 1.0);
    let pred = net.predict(&x).unwrap();
    let y = random_matrix(&mut r, 4, net.output_dim(), 1.0);
    let (_, g) = loss_and_grad(LossKind::Mse, &pred, &y).unwrap();
    let grads = net.backward(&x, &g).unwrap();
    assert!(grads.weights[0].column(1).iter().all(|&v| v == 0.0));
    assert_eq!(grads.biases[0][1], 0.0);
    assert!(grads.weights[1].row(1).iter().all(|&v| v == 0.0));
}
