use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agent::MetricSeries;
use crate::error::{shape_err, Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const DORMANCY_FILE: &str = "dormancy.csv";
pub const OVERLAP_FILE: &str = "overlap.csv";
pub const RECYCLE_FILE: &str = "recycle.csv";
pub const PRUNE_FILE: &str = "prune.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

pub const METRIC_COLUMNS: [&str; 9] = [
    "step_env",
    "step_grad",
    "episode",
    "return",
    "loss",
    "dormant_frac_tau0",
    "dormant_frac_tau",
    "recycled_count",
    "seed",
];
pub const DORMANCY_COLUMNS: [&str; 7] = [
    "step_grad",
    "layer",
    "tau",
    "dormant_count",
    "layer_size",
    "dormant_fraction",
    "overlap",
];
pub const OVERLAP_COLUMNS: [&str; 5] = ["step_grad", "layer", "tau", "overlap_first", "overlap_union"];
pub const RECYCLE_COLUMNS: [&str; 5] = ["step_grad", "layer", "n_recycled", "strategy", "tau_or_fraction"];
pub const PRUNE_COLUMNS: [&str; 5] = [
    "step_grad",
    "pruned_now",
    "pruned_total",
    "return_before",
    "return_after",
];

/// Writes a header (even for zero rows) followed by the serialized rows.
pub fn write_csv<T: Serialize>(path: &Path, columns: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows after checking the header matches `columns` exactly.
pub fn read_csv<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != columns {
        return Err(shape_err("csv schema", columns.join(","), header.join(",")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_series(dir: &Path, series: &MetricSeries) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join(METRICS_FILE), &METRIC_COLUMNS, &series.rows)?;
    write_csv(&dir.join(DORMANCY_FILE), &DORMANCY_COLUMNS, &series.dormancy)?;
    write_csv(&dir.join(OVERLAP_FILE), &OVERLAP_COLUMNS, &series.overlap)?;
    write_csv(&dir.join(RECYCLE_FILE), &RECYCLE_COLUMNS, &series.recycle)?;
    write_csv(&dir.join(PRUNE_FILE), &PRUNE_COLUMNS, &series.prune)?;
    Ok(())
}

pub fn read_series(dir: &Path) -> Result<MetricSeries> {
    Ok(MetricSeries {
        rows: read_csv(&dir.join(METRICS_FILE), &METRIC_COLUMNS)?,
        dormancy: read_csv(&dir.join(DORMANCY_FILE), &DORMANCY_COLUMNS)?,
        overlap: read_csv(&dir.join(OVERLAP_FILE), &OVERLAP_COLUMNS)?,
        recycle: read_csv(&dir.join(RECYCLE_FILE), &RECYCLE_COLUMNS)?,
        prune: read_csv(&dir.join(PRUNE_FILE), &PRUNE_COLUMNS)?,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// One sweep cell as listed in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub variant: String,
    pub seed: u64,
    /// Relative to the output directory.
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub recipe: String,
    pub n_cells: usize,
    pub cells: Vec<ManifestCell>,
}

/// End-of-run numbers for one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: String,
    pub seed: u64,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub final_return: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_dormant_frac_tau0: Option<f64>,
    pub final_dormant_frac_tau: Option<f64>,
    pub effective_rank: Option<usize>,
}
