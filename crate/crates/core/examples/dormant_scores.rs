//! Scores every hidden neuron of a small relu network and reports the
//! τ-dormant fraction at a few thresholds.

use rand::Rng;
use redo_lab::dormancy::DormancyReport;
use redo_lab::nn::{Activation, LayerSpec, Matrix, Network};
use redo_lab::rng;

fn main() -> redo_lab::Result<()> {
    let mut net = Network::build(&LayerSpec::mlp(6, &[16, 16], 3, Activation::Relu), 7)?;
    // Silence neuron 3 of the first layer for every input.
    let layer = net.layer_mut(0);
    for r in 0..layer.weights.rows() {
        layer.weights.set(r, 3, 0.0);
    }
    layer.bias[3] = -1.0;

    let mut r = rng::seeded(7, 0);
    let data: Vec<f64> = (0..64 * 6).map(|_| r.random_range(-1.0..1.0)).collect();
    let batch = Matrix::from_vec(64, 6, data)?;
    let (_, trace) = net.forward(&batch)?;

    for tau in [0.0, 0.025, 0.1, 0.5] {
        let report = DormancyReport::from_trace(&trace, tau)?;
        println!(
            "τ={tau:<5} dormant {:>2}/32  fraction {:.3}  per layer {:?}",
            report.dormant_count(),
            report.fraction()?,
            report.dormant_sets()
        );
    }
    let first = &DormancyReport::from_trace(&trace, 0.0)?.layers[0];
    let s: Vec<String> = first.scores.iter().map(|s| format!("{s:.2}")).collect();
    println!("layer 0 scores: {}", s.join(" "));
    Ok(())
}
