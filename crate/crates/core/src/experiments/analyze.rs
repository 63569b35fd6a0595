use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::io::{
    read_csv, read_json, write_csv, write_json, Manifest, CONFIG_FILE, DORMANCY_COLUMNS,
    DORMANCY_FILE, MANIFEST_FILE, METRICS_FILE, METRIC_COLUMNS,
};
use super::run::FINAL_WINDOW;
use crate::agent::{DormancyRow, MetricRow, MetricSeries};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, bootstrap_ci, AggregateReport, RunMatrix, Statistic};
use crate::rng;

pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FINAL_FILE: &str = "plot_final.csv";
pub const PLOT_DORMANCY_FILE: &str = "plot_dormancy.csv";

/// How cells are grouped before aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Variant,
    Seed,
}

/// Per-run score fed into the group statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalMetric {
    /// Mean return over the final window of rows.
    Return,
    /// Mean loss over the final window of rows.
    Loss,
    /// Overall dormant fraction at the last measurement of the trajectory τ.
    DormantFraction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzeOptions {
    pub group_by: GroupBy,
    pub statistic: Statistic,
    pub metric: FinalMetric,
    pub window: usize,
    /// τ of the dormancy trajectories; the run's primary τ when unset.
    pub tau: Option<f64>,
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            group_by: GroupBy::Variant,
            statistic: Statistic::Iqm,
            metric: FinalMetric::Return,
            window: FINAL_WINDOW,
            tau: None,
            b: 2000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    #[serde(flatten)]
    pub report: AggregateReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub recipe: String,
    pub metric: FinalMetric,
    pub window: usize,
    pub tau: f64,
    pub groups: Vec<GroupReport>,
}

/// One row of a plot-ready CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub group: String,
}

pub const PLOT_COLUMNS: [&str; 5] = ["x", "y", "y_lo", "y_hi", "group"];

fn final_score(series: &MetricSeries, metric: FinalMetric, window: usize, tau: f64) -> Option<f64> {
    match metric {
        FinalMetric::Return => series.final_return(window),
        FinalMetric::Loss => {
            let losses: Vec<f64> = series.rows.iter().filter_map(|r| r.loss).collect();
            let tail = &losses[losses.len().saturating_sub(window)..];
            (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
        }
        FinalMetric::DormantFraction => series.final_dormant_fraction(tau),
    }
}

/// Aggregates a finished recipe directory into `report.json` plus the plot
/// CSVs, all written into `dir`.
pub fn analyze(dir: &Path, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let tau = match opts.tau {
        Some(t) => t,
        None => {
            let cfg = std::fs::read_to_string(dir.join(CONFIG_FILE)).ok();
            cfg.and_then(|t| super::config::parse_config(&t, &[]).ok())
                .map_or(0.025, |c: ExperimentConfig| c.primary_tau)
        }
    };

    // group -> (final scores, step -> per-run dormant fractions)
    let mut order: Vec<String> = Vec::new();
    let mut scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut traj: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for cell in &manifest.cells {
        let cell_dir = dir.join(&cell.dir);
        let series = MetricSeries {
            rows: read_csv::<MetricRow>(&cell_dir.join(METRICS_FILE), &METRIC_COLUMNS)?,
            dormancy: read_csv::<DormancyRow>(&cell_dir.join(DORMANCY_FILE), &DORMANCY_COLUMNS)?,
            ..Default::default()
        };
        let group = match opts.group_by {
            GroupBy::Variant => cell.variant.clone(),
            GroupBy::Seed => format!("seed_{}", cell.seed),
        };
        if !order.contains(&group) {
            order.push(group.clone());
        }
        let entry = scores.entry(group.clone()).or_default();
        if let Some(v) = final_score(&series, opts.metric, opts.window, tau) {
            entry.push(v);
        }
        let t = traj.entry(group).or_default();
        for (step, frac) in series.dormant_trajectory(tau) {
            t.entry(step).or_default().push(frac);
        }
    }

    let mut r = rng::seeded(opts.seed, rng::stream::BOOTSTRAP);
    let mut groups = Vec::new();
    let mut plot_final = Vec::new();
    for (i, g) in order.iter().enumerate() {
        let values = &scores[g];
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "group `{g}` has no runs with a {:?} score",
                opts.metric
            )));
        }
        let report = aggregate(&RunMatrix::single_task(values.clone())?, opts.statistic, opts.b, opts.alpha, &mut r)?;
        plot_final.push(PlotRow {
            x: i as f64,
            y: report.point,
            y_lo: report.ci_lo,
            y_hi: report.ci_hi,
            group: g.clone(),
        });
        groups.push(GroupReport {
            group: g.clone(),
            report,
        });
    }

    let mut plot_dormancy = Vec::new();
    for g in &order {
        for (&step, fracs) in &traj[g] {
            let ci = bootstrap_ci(&RunMatrix::single_task(fracs.clone())?, Statistic::Mean, opts.b, opts.alpha, &mut r)?;
            plot_dormancy.push(PlotRow {
                x: step as f64,
                y: ci.point,
                y_lo: ci.lo,
                y_hi: ci.hi,
                group: g.clone(),
            });
        }
    }

    let report = AnalysisReport {
        recipe: manifest.recipe,
        metric: opts.metric,
        window: opts.window,
        tau,
        groups,
    };
    write_json(&dir.join(REPORT_FILE), &report)?;
    write_csv(&dir.join(PLOT_FINAL_FILE), &PLOT_COLUMNS, &plot_final)?;
    write_csv(&dir.join(PLOT_DORMANCY_FILE), &PLOT_COLUMNS, &plot_dormancy)?;
    Ok(report)
}
