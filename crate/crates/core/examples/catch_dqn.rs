//! DQN on Catch with a dormancy probe, optionally with ReDo.
//!
//! cargo run --release --example catch_dqn -- [replay_ratio] [env_steps] [redo]

use redo_lab::agent::{run_training, DormancyProbe, DqnConfig, Recycler, TrainingHook, Trigger};
use redo_lab::envs::EnvSpec;

fn main() -> redo_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let replay_ratio: f64 = args.first().map_or(1.0, |s| s.parse().expect("replay ratio"));
    let steps: usize = args.get(1).map_or(10_000, |s| s.parse().expect("env steps"));
    let redo = args.get(2).is_some_and(|s| s == "redo");

    let config = DqnConfig {
        replay_ratio,
        total_env_steps: steps,
        ..DqnConfig::default()
    };
    let seed = 0;
    let mut hooks: Vec<Box<dyn TrainingHook>> = vec![Box::new(DormancyProbe::new(
        Trigger::EveryGradSteps(1000),
        vec![0.0, 0.025, 0.1],
        0.025,
        64,
        seed,
    ))];
    if redo {
        hooks.push(Box::new(Recycler::redo(0.1, 1000, 64, seed)));
    }
    let out = run_training(&EnvSpec::catch(), &config, seed, &mut hooks)?;

    println!("grad step  τ=0.025 dormant");
    for (step, frac) in out.series.dormant_trajectory(0.025) {
        println!("{step:>9}  {frac:.3}");
    }
    println!(
        "{} grad steps, mean return over the last 100 episodes {:.3}, recycled {}",
        out.agent.grad_steps,
        out.series.final_return(100).unwrap_or(f64::NAN),
        out.series.recycle.iter().map(|r| r.n_recycled).sum::<usize>()
    );
    Ok(())
}
