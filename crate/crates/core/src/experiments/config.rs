use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{DqnConfig, SupervisedConfig};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::recycle::{RecycleStrategy, SelectionStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    DormancyGrowth,
    SupervisedNonstationary,
    OfflineFixedBuffer,
    FixedRandomTargets,
    RrSweep,
    RedoMitigation,
    LrScaled,
    WidthSweep,
    BaselineCompare,
    SelectionCompare,
    DistillProbe,
    PruneProbe,
}

impl Recipe {
    pub const ALL: [Recipe; 12] = [
        Recipe::DormancyGrowth,
        Recipe::SupervisedNonstationary,
        Recipe::OfflineFixedBuffer,
        Recipe::FixedRandomTargets,
        Recipe::RrSweep,
        Recipe::RedoMitigation,
        Recipe::LrScaled,
        Recipe::WidthSweep,
        Recipe::BaselineCompare,
        Recipe::SelectionCompare,
        Recipe::DistillProbe,
        Recipe::PruneProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::DormancyGrowth => "dormancy_growth",
            Recipe::SupervisedNonstationary => "supervised_nonstationary",
            Recipe::OfflineFixedBuffer => "offline_fixed_buffer",
            Recipe::FixedRandomTargets => "fixed_random_targets",
            Recipe::RrSweep => "rr_sweep",
            Recipe::RedoMitigation => "redo_mitigation",
            Recipe::LrScaled => "lr_scaled",
            Recipe::WidthSweep => "width_sweep",
            Recipe::BaselineCompare => "baseline_compare",
            Recipe::SelectionCompare => "selection_compare",
            Recipe::DistillProbe => "distill_probe",
            Recipe::PruneProbe => "prune_probe",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == name)
            .ok_or_else(|| Error::UnknownRecipe(name.to_string()))
    }
}

/// Periodic dormancy measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Gradient steps between measurements.
    pub period: u64,
    /// Scoring batch size drawn from the replay buffer.
    pub batch_size: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            period: 1000,
            batch_size: 64,
        }
    }
}

/// ReDo and the other interventions used by comparison recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecycleConfig {
    pub tau: f64,
    pub period: u64,
    pub batch_size: usize,
    pub strategy: RecycleStrategy,
    /// Starting fraction of the cosine schedule used by `selection_compare`.
    pub cosine_start: f64,
    /// Schedule horizon in gradient steps; the run's total when unset.
    pub cosine_horizon: Option<u64>,
    /// Layers re-initialised by the reset baseline.
    pub reset_k: usize,
    pub reset_period: u64,
    pub weight_decay: f64,
}

impl Default for RecycleConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            period: 1000,
            batch_size: 64,
            strategy: RecycleStrategy::default(),
            cosine_start: 0.1,
            cosine_horizon: None,
            reset_k: 1,
            reset_period: 20_000,
            weight_decay: 1e-5,
        }
    }
}

/// Grid axes of the sweep-style recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub replay_ratios: Vec<f64>,
    /// Cross every replay ratio with ReDo on/off.
    pub with_redo: bool,
    pub width_multipliers: Vec<usize>,
    pub lr_divisor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            replay_ratios: vec![0.25, 0.5, 1.0, 2.0],
            with_redo: false,
            width_multipliers: vec![1, 2, 4],
            lr_divisor: 4.0,
        }
    }
}

/// Synthetic (or CSV) classification task and its training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisedRecipeConfig {
    pub n_samples: usize,
    pub dim: usize,
    pub n_classes: usize,
    pub noise: f64,
    /// Load the task from this CSV instead of generating it.
    pub dataset: Option<PathBuf>,
    pub shuffle_every: usize,
    pub train: SupervisedConfig,
}

impl Default for SupervisedRecipeConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            dim: 32,
            n_classes: 10,
            noise: crate::envs::DEFAULT_CLUSTER_NOISE,
            dataset: None,
            shuffle_every: 20,
            train: SupervisedConfig::default(),
        }
    }
}

/// Fixed-data training: offline buffer, random targets, distillation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfflineConfig {
    /// Random-policy transitions collected into the frozen buffer.
    pub buffer_steps: usize,
    pub grad_steps: u64,
    pub log_every: u64,
    /// Seed of the random teacher network.
    pub teacher_seed: u64,
    /// Distillation teacher checkpoint.
    pub teacher: Option<PathBuf>,
    /// Checkpoint the pretrained-init student starts from.
    pub pretrained: Option<PathBuf>,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            buffer_steps: 10_000,
            grad_steps: 25_000,
            log_every: 500,
            teacher_seed: 12_345,
            teacher: None,
            pretrained: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    pub period: u64,
    pub eval_episodes: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            period: 5000,
            eval_episodes: 20,
        }
    }
}

/// A complete, declarative experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: Recipe,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    /// τ reported in the `dormant_frac_tau` column.
    #[serde(default = "default_primary_tau")]
    pub primary_tau: f64,
    #[serde(default)]
    pub env: EnvSpec,
    #[serde(default)]
    pub dqn: DqnConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub recycle: RecycleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub supervised: SupervisedRecipeConfig,
    #[serde(default)]
    pub offline: OfflineConfig,
    #[serde(default)]
    pub prune: PruneConfig,
}

fn default_taus() -> Vec<f64> {
    vec![0.0, 0.025, 0.1]
}

fn default_primary_tau() -> f64 {
    0.025
}

impl ExperimentConfig {
    /// Defaults for `recipe` with the given seeds.
    pub fn new(recipe: Recipe, seeds: Vec<u64>) -> Self {
        Self {
            recipe,
            seeds,
            out_dir: None,
            taus: default_taus(),
            primary_tau: default_primary_tau(),
            env: EnvSpec::default(),
            dqn: DqnConfig::default(),
            probe: ProbeConfig::default(),
            recycle: RecycleConfig::default(),
            sweep: SweepConfig::default(),
            supervised: SupervisedRecipeConfig::default(),
            offline: OfflineConfig::default(),
            prune: PruneConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if self.taus.iter().any(|t| !(*t >= 0.0)) || !(self.primary_tau >= 0.0) {
            return bad("taus must be >= 0".into());
        }
        self.env.validate()?;
        self.dqn.validate()?;
        self.supervised.train.validate()?;
        SelectionStrategy::Threshold { tau: self.recycle.tau }
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.probe.period == 0 || self.recycle.period == 0 {
            return bad("probe.period and recycle.period must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.recycle.cosine_start) {
            return bad("recycle.cosine_start must be in [0, 1]".into());
        }
        if self.recycle.reset_k == 0 || self.recycle.reset_k > self.dqn.hidden.len() + 1 {
            return bad(format!(
                "recycle.reset_k must be in 1..={}",
                self.dqn.hidden.len() + 1
            ));
        }
        match self.recipe {
            Recipe::RrSweep if self.sweep.replay_ratios.is_empty() => {
                return bad("sweep.replay_ratios must be non-empty".into());
            }
            Recipe::RrSweep => {
                for &rr in &self.sweep.replay_ratios {
                    DqnConfig {
                        replay_ratio: rr,
                        ..self.dqn.clone()
                    }
                    .validate()?;
                }
            }
            Recipe::WidthSweep
                if self.sweep.width_multipliers.is_empty()
                    || self.sweep.width_multipliers.contains(&0) =>
            {
                return bad("sweep.width_multipliers must be non-empty and positive".into());
            }
            Recipe::LrScaled if !(self.sweep.lr_divisor > 0.0) => {
                return bad("sweep.lr_divisor must be > 0".into());
            }
            Recipe::SupervisedNonstationary if self.supervised.shuffle_every == 0 => {
                return bad("supervised.shuffle_every must be >= 1".into());
            }
            Recipe::DistillProbe
                if self.offline.teacher.is_none() || self.offline.pretrained.is_none() =>
            {
                return bad("distill_probe needs offline.teacher and offline.pretrained".into());
            }
            Recipe::OfflineFixedBuffer | Recipe::FixedRandomTargets | Recipe::DistillProbe
                if self.offline.buffer_steps == 0 =>
            {
                return bad("offline.buffer_steps must be >= 1".into());
            }
            Recipe::PruneProbe if self.prune.period == 0 || self.prune.eval_episodes == 0 => {
                return bad("prune.period and prune.eval_episodes must be >= 1".into());
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses TOML, applies `key.path=value` overrides, then validates.
///
/// Override values are read as TOML literals, falling back to plain strings,
/// so `--set dqn.replay_ratio=4` and `--set recipe=rr_sweep` both work.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_config(&text, overrides)
}

pub fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
