//! Trains on Catch, prunes every τ=0-dormant neuron and checks that greedy
//! evaluation returns do not change.

use redo_lab::agent::{evaluate, run_training, DqnConfig};
use redo_lab::dormancy::{prune_dormant, DormancyReport};
use redo_lab::envs::EnvSpec;
use redo_lab::rng;

fn main() -> redo_lab::Result<()> {
    let env = EnvSpec::catch();
    let config = DqnConfig {
        replay_ratio: 1.0,
        total_env_steps: 10_000,
        ..DqnConfig::default()
    };
    let out = run_training(&env, &config, 0, &mut [])?;
    let mut net = out.agent.online.clone();

    let states = out.agent.buffer.sample_states(256, &mut rng::seeded(0, rng::stream::PRUNE))?;
    let (_, trace) = net.forward(&states)?;
    let report = DormancyReport::from_trace(&trace, 0.0)?;

    let before = evaluate(&net, &env, 20, 0.0, 99)?;
    let pruned = prune_dormant(&mut net, &report.dormant_sets())?;
    let after = evaluate(&net, &env, 20, 0.0, 99)?;
    println!("pruned {pruned} neurons; greedy return {before:.3} before, {after:.3} after");
    Ok(())
}
