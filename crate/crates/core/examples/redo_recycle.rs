//! One ReDo step on a network with dead neurons: the dead units get fresh
//! incoming weights and zero outgoing weights, so outputs do not move.

use rand::Rng;
use redo_lab::dormancy::DormancyReport;
use redo_lab::nn::{Activation, LayerSpec, Matrix, Network, OptState};
use redo_lab::recycle::{redo_step, RecycleStrategy};
use redo_lab::rng;

fn main() -> redo_lab::Result<()> {
    let mut net = Network::build(&LayerSpec::mlp(4, &[8, 8], 2, Activation::Relu), 1)?;
    for (layer, neuron) in [(0, 2), (0, 5), (1, 0)] {
        let l = net.layer_mut(layer);
        for r in 0..l.weights.rows() {
            l.weights.set(r, neuron, 0.0);
        }
        l.bias[neuron] = -0.5;
    }
    let mut r = rng::seeded(1, rng::stream::RECYCLE);
    let data: Vec<f64> = (0..32 * 4).map(|_| r.random_range(-1.0..1.0)).collect();
    let batch = Matrix::from_vec(32, 4, data)?;

    let (before, trace) = net.forward(&batch)?;
    println!("before: τ=0 fraction {:.3}", DormancyReport::from_trace(&trace, 0.0)?.fraction()?);

    let mut opt = OptState::adam(&net, 1e-3, 1e-8)?;
    let event = redo_step(&mut net, &trace, 0.0, RecycleStrategy::default(), &mut opt, &mut r)?;
    println!("recycled per layer: {:?}", event.recycled);

    let (after, trace) = net.forward(&batch)?;
    println!("outputs unchanged: {}", before == after);
    println!("after: τ=0 fraction {:.3}", DormancyReport::from_trace(&trace, 0.0)?.fraction()?);
    Ok(())
}
