//! Trains the same classifier on fixed labels and on labels reshuffled every
//! few epochs, tracking the τ=0 dormant fraction per epoch.

use redo_lab::agent::{run_supervised, DormancyProbe, SupervisedConfig, TrainingHook, Trigger};
use redo_lab::envs::{make_classification_task, DEFAULT_CLUSTER_NOISE};

fn main() -> redo_lab::Result<()> {
    let task = make_classification_task(2000, 32, 10, DEFAULT_CLUSTER_NOISE, 0)?;
    for shuffle_every in [None, Some(10)] {
        let config = SupervisedConfig {
            epochs: 40,
            shuffle_every,
            ..SupervisedConfig::default()
        };
        let mut hooks: Vec<Box<dyn TrainingHook>> =
            vec![Box::new(DormancyProbe::new(Trigger::EveryEpoch, vec![0.0], 0.0, 0, 0))];
        let out = run_supervised(&task, &config, 0, &mut hooks)?;
        let trajectory: Vec<String> = out
            .series
            .dormant_trajectory(0.0)
            .iter()
            .step_by(5)
            .map(|(_, f)| format!("{f:.3}"))
            .collect();
        println!("shuffle every {shuffle_every:?}: τ=0 fraction every 5 epochs {}", trajectory.join(" "));
        println!("  final train accuracy {:.3}", out.series.rows.last().and_then(|r| r.episode_return).unwrap_or(0.0));
    }
    Ok(())
}
