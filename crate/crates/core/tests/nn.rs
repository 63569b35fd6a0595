//! Network construction, forward oracle, optimizer and checkpoint properties.

mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use redo_lab::nn::{
    load_checkpoint, loss_and_grad, save_checkpoint, Activation, Gradients, InitSpec, LayerSpec,
    LossKind, Matrix, Network, OptState, OptimizerKind,
};

/// Independent re-evaluation: explicit loops, no matrix helpers.
fn oracle_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (l, layer) in net.layers().iter().enumerate() {
        let mut next = vec![0.0; layer.spec.out_dim];
        for (j, out) in next.iter_mut().enumerate() {
            let mut z = layer.bias[j];
            for (i, hi) in h.iter().enumerate() {
                z += hi * layer.weights.get(i, j);
            }
            *out = match layer.spec.activation {
                Activation::Relu => z.max(0.0),
                Activation::LeakyRelu { slope } => {
                    if z > 0.0 {
                        z
                    } else {
                        slope * z
                    }
                }
                Activation::Identity => z,
            };
            if l + 1 < net.layers().len() && net.is_pruned(l, j) {
                *out = 0.0;
            }
        }
        h = next;
    }
    h
}

#[test]
fn forward_matches_straight_line_oracle() {
    let mut r = rng_for(5);
    for _ in 0..200 {
        let act = random_activation(&mut r);
        let net = random_net(&mut r, act);
        let x = random_matrix(&mut r, 5, net.input_dim(), 2.0);
        let out = net.predict(&x).unwrap();
        for i in 0..5 {
            for (a, b) in out.row(i).iter().zip(oracle_forward(&net, x.row(i))) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn build_contract() {
    let specs = vec![
        LayerSpec::new(2, 3, Activation::Relu, InitSpec::scaled_uniform(1.0, 0)),
        LayerSpec::new(3, 1, Activation::Identity, InitSpec::scaled_uniform(1.0, 1)),
    ];
    let a = Network::build(&specs, 7).unwrap();
    assert_eq!(a.layers()[0].weights.shape(), (2, 3));
    assert_eq!(a.layers()[1].weights.shape(), (3, 1));
    assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    assert!(a.masks().iter().flatten().all(|&m| !m));
    assert_eq!(a, Network::build(&specs, 7).unwrap());
    let limit = (3.0f64 / 2.0).sqrt();
    assert!(a.layers()[0].weights.data().iter().all(|w| w.abs() <= limit));

    let bad = vec![specs[0], LayerSpec::new(4, 1, Activation::Identity, InitSpec::scaled_uniform(1.0, 1))];
    assert!(Network::build(&bad, 7).is_err());
}

#[test]
fn forward_rejects_bad_input() {
    let net = Network::build(&LayerSpec::mlp(3, &[4], 2, Activation::Relu), 0).unwrap();
    assert!(net.predict(&Matrix::zeros(2, 4)).is_err());
    let mut x = Matrix::zeros(1, 3);
    x.set(0, 1, f64::NAN);
    assert!(net.predict(&x).is_err());
}

#[test]
fn adam_first_step_hand_value() {
    let spec = LayerSpec::new(1, 1, Activation::Identity, InitSpec::scaled_uniform(1.0, 0));
    let layer = redo_lab::nn::Layer {
        spec,
        weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
        bias: vec![0.0],
    };
    let mut net = Network::from_parts(vec![layer], vec![]).unwrap();
    let eps = 1e-8;
    let mut opt = OptState::new(&net, OptimizerKind::adam(eps), 0.1, 0.0).unwrap();
    let mut g = Gradients::zeros_like(&net);
    g.weights[0].set(0, 0, 1.0);
    opt.step(&mut net, &g).unwrap();
    // m̂ = 1, v̂ = 1 after bias correction at t = 1.
    let m_hat = (0.1 * 1.0) / (1.0 - 0.9);
    let v_hat = (0.001 * 1.0) / (1.0 - 0.999);
    let want = 1.0 - 0.1 * m_hat / (f64::sqrt(v_hat) + eps);
    assert!((net.layers()[0].weights.get(0, 0) - want).abs() < 1e-12);
}

#[test]
fn zero_grads_and_decay_only() {
    let mut r = rng_for(8);
    for kind in [OptimizerKind::adam(1.5e-4), OptimizerKind::Sgd { momentum: 0.9 }] {
        let mut net = random_net(&mut r, Activation::Relu);
        let before = net.clone();
        let mut opt = OptState::new(&net, kind, 0.01, 0.0).unwrap();
        let g = Gradients::zeros_like(&net);
        opt.step(&mut net, &g).unwrap();
        assert_eq!(net, before);

        let mut opt = OptState::new(&net, kind, 1.0, 0.1).unwrap();
        let g = Gradients::zeros_like(&net);
        opt.step(&mut net, &g).unwrap();
        for (a, b) in net.layers().iter().zip(before.layers()) {
            for (x, y) in a.weights.data().iter().zip(b.weights.data()) {
                assert_eq!(*x, y * 0.9);
            }
            assert_eq!(a.bias, b.bias);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng_for(9);
    for k in 0..20 {
        let act = random_activation(&mut r);
        let mut net = random_net(&mut r, act);
        if k % 2 == 0 {
            net.prune(0, 0).unwrap();
        }
        let path = dir.path().join(format!("net_{k}.bin"));
        save_checkpoint(&net, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, net);
        let x = random_matrix(&mut r, 3, net.input_dim(), 1.0);
        assert_eq!(back.predict(&x).unwrap(), net.predict(&x).unwrap());
    }
    assert!(load_checkpoint(dir.path().join("missing.bin")).is_err());
}

proptest! {
    #[test]
    fn masks_stay_zero_through_training(seed in 0u64..500, steps in 1usize..6, adam in any::<bool>()) {
        let mut r = rng_for(seed);
        let mut net = random_net(&mut r, Activation::Relu);
        let widths = net.hidden_widths();
        let layer = r.random_range(0..widths.len());
        let neuron = r.random_range(0..widths[layer]);
        net.prune(layer, neuron).unwrap();
        let kind = if adam { OptimizerKind::adam(1e-8) } else { OptimizerKind::Sgd { momentum: 0.9 } };
        let mut opt = OptState::new(&net, kind, 0.05, 0.01).unwrap();
        let incoming_before = net.layers()[layer].weights.column(neuron);
        for _ in 0..steps {
            let x = random_matrix(&mut r, 4, net.input_dim(), 1.0);
            let y = random_matrix(&mut r, 4, net.output_dim(), 1.0);
            let cache = net.forward_cached(&x).unwrap();
            let (_, g) = loss_and_grad(LossKind::Mse, cache.output(), &y).unwrap();
            let grads = net.backward_cached(&cache, &g).unwrap();
            opt.step(&mut net, &grads).unwrap();
            prop_assert!(net.layers()[layer + 1].weights.row(neuron).iter().all(|&w| w == 0.0));
        }
        prop_assert_eq!(net.layers()[layer].weights.column(neuron), incoming_before);
    }

    #[test]
    fn forward_is_deterministic(seed in any::<u64>()) {
        let specs = LayerSpec::mlp(4, &[6, 5], 3, Activation::Relu);
        let a = Network::build(&specs, seed).unwrap();
        let b = Network::build(&specs, seed).unwrap();
        let mut r = rng_for(seed);
        let x = random_matrix(&mut r, 3, 4, 1.0);
        prop_assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
    }
}
