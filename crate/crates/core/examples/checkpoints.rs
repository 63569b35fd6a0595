//! Saves a trained Catch agent's network and loads it back bit-exactly.

use redo_lab::agent::{evaluate, run_training, DqnConfig};
use redo_lab::envs::EnvSpec;
use redo_lab::nn::{load_checkpoint, save_checkpoint};

fn main() -> redo_lab::Result<()> {
    let env = EnvSpec::catch();
    let config = DqnConfig {
        total_env_steps: 5000,
        replay_ratio: 1.0,
        ..DqnConfig::default()
    };
    let out = run_training(&env, &config, 3, &mut [])?;
    let path = std::env::temp_dir().join("redo_lab_catch_agent.bin");
    save_checkpoint(&out.agent.online, &path)?;
    let loaded = load_checkpoint(&path)?;
    println!("saved {} parameters to {}", loaded.parameter_count(), path.display());
    println!("identical after reload: {}", loaded == out.agent.online);
    println!("greedy return {:.3}", evaluate(&loaded, &env, 20, 0.0, 1)?);
    Ok(())
}
