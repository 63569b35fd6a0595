//! Declarative experiment recipes, the sweep runner, and run analysis.
//!
//! A recipe expands into `(variant, seed)` cells. Each cell writes its logs to
//! `<out>/<variant>/seed_<s>/`; the resolved config is echoed to
//! `<out>/config.toml` and `<out>/manifest.json` lists every cell once all of
//! them have finished.

mod analyze;
mod config;
mod io;
mod run;

pub use analyze::{
    analyze, AnalysisReport, AnalyzeOptions, FinalMetric, GroupBy, GroupReport, PlotRow,
    PLOT_COLUMNS, PLOT_DORMANCY_FILE, PLOT_FINAL_FILE, REPORT_FILE,
};
pub use config::{
    apply_override, load_config, parse_config, ExperimentConfig, OfflineConfig, ProbeConfig,
    PruneConfig, Recipe, RecycleConfig, SupervisedRecipeConfig, SweepConfig,
};
pub use io::{
    read_csv, read_json, read_series, write_csv, write_json, write_series, CellSummary, Manifest,
    ManifestCell, CONFIG_FILE, DORMANCY_COLUMNS, DORMANCY_FILE, MANIFEST_FILE, METRICS_FILE,
    METRIC_COLUMNS, OVERLAP_COLUMNS, OVERLAP_FILE, PRUNE_COLUMNS, PRUNE_FILE, RECYCLE_COLUMNS,
    RECYCLE_FILE, SUMMARY_FILE,
};
pub use run::{
    plan_cells, planned_grad_steps, run_cell, run_recipe, CellKind, CellPlan, CellResult,
    Intervention, FINAL_WINDOW, RANK_BATCH, RANK_DELTA,
};
