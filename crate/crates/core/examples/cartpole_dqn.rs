//! A short DQN run on CartPole, printing returns as episodes finish.

use redo_lab::agent::{run_training, DqnConfig};
use redo_lab::envs::EnvSpec;

fn main() -> redo_lab::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(20_000, |s| s.parse().expect("env steps"));
    let config = DqnConfig {
        replay_ratio: 1.0,
        total_env_steps: steps,
        ..DqnConfig::default()
    };
    let out = run_training(&EnvSpec::cartpole(), &config, 0, &mut [])?;
    let returns: Vec<f64> = out.series.rows.iter().filter_map(|r| r.episode_return).collect();
    for (i, chunk) in returns.chunks(returns.len().div_ceil(10).max(1)).enumerate() {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        println!("episodes block {i}: mean return {mean:.1}");
    }
    Ok(())
}
