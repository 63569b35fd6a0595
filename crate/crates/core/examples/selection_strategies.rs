//! Which neurons each selection rule would recycle for one set of scores.

use redo_lab::dormancy::LayerScores;
use redo_lab::nn::{Activation, LayerSpec, Network};
use redo_lab::recycle::{select_for_recycling, SelectionStrategy};
use redo_lab::rng;

fn main() -> redo_lab::Result<()> {
    let net = Network::build(&LayerSpec::mlp(3, &[6], 2, Activation::Relu), 0)?;
    let scores = vec![LayerScores {
        scores: vec![0.0, 0.05, 1.9, 0.4, 2.6, 1.05],
        pruned: vec![false; 6],
    }];
    let mut r = rng::seeded(0, rng::stream::RECYCLE);
    for strategy in [
        SelectionStrategy::Threshold { tau: 0.1 },
        SelectionStrategy::LowestScore { fraction: 0.34 },
        SelectionStrategy::InverseScore { fraction: 0.34 },
        SelectionStrategy::Random { fraction: 0.34 },
        SelectionStrategy::Utility { fraction: 0.34 },
    ] {
        let chosen = select_for_recycling(&net, &scores, strategy, &mut r)?;
        println!("{:<14} {:?}", strategy.name(), chosen[0]);
    }
    Ok(())
}
