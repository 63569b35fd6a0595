//! Runs a small replay-ratio sweep recipe into a directory and aggregates it.
//!
//! cargo run --release --example recipe_sweep -- [out_dir]

use std::path::PathBuf;

use redo_lab::experiments::{analyze, run_recipe, AnalyzeOptions, ExperimentConfig, FinalMetric, Recipe};

fn main() -> redo_lab::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("redo_lab_rr_sweep"), PathBuf::from);
    let mut config = ExperimentConfig::new(Recipe::RrSweep, vec![0, 1, 2]);
    config.dqn.total_env_steps = 5000;
    config.sweep.replay_ratios = vec![0.5, 2.0];
    config.sweep.with_redo = true;
    let manifest = run_recipe(&config, &out, 1)?;
    println!("{} cells written to {}", manifest.n_cells, out.display());

    for metric in [FinalMetric::Return, FinalMetric::DormantFraction] {
        let opts = AnalyzeOptions {
            metric,
            ..AnalyzeOptions::default()
        };
        let report = analyze(&out, &opts)?;
        for g in &report.groups {
            println!(
                "{metric:?} {:<12} {:.3} [{:.3}, {:.3}]",
                g.group, g.report.point, g.report.ci_lo, g.report.ci_hi
            );
        }
    }
    Ok(())
}
