//! Offline training on a frozen random-policy buffer, and regression onto a
//! random teacher's outputs, with their τ=0.025 dormant trajectories.

use redo_lab::experiments::{plan_cells, run_cell, ExperimentConfig, Recipe};

fn main() -> redo_lab::Result<()> {
    for recipe in [Recipe::OfflineFixedBuffer, Recipe::FixedRandomTargets] {
        let mut config = ExperimentConfig::new(recipe, vec![0]);
        config.offline.buffer_steps = 5000;
        config.offline.grad_steps = 5000;
        config.offline.log_every = 1000;
        for plan in plan_cells(&config) {
            let result = run_cell(&config, &plan)?;
            let trajectory: Vec<String> = result
                .series
                .dormant_trajectory(0.025)
                .iter()
                .map(|(s, f)| format!("{s}:{f:.3}"))
                .collect();
            println!("{} ({}): {}", recipe.name(), plan.variant, trajectory.join(" "));
        }
    }
    Ok(())
}
