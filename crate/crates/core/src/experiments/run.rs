use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Recipe};
use super::io::{
    write_json, write_series, CellSummary, Manifest, ManifestCell, CONFIG_FILE, MANIFEST_FILE,
    SUMMARY_FILE,
};
use crate::agent::{
    collect_random, penultimate_features, run_offline, run_offline_from, run_supervised,
    run_training, AgentState, DormancyProbe, DqnConfig, LayerReset, MetricSeries, OfflineTargets,
    PruneProbe, Recycler, StateSource, TrainingHook, Trigger,
};
use crate::envs::{load_classification_csv, make_classification_task, RegressionTask};
use crate::error::{shape_err, Error, Result};
use crate::metrics::effective_rank;
use crate::nn::{load_checkpoint, Network};
use crate::recycle::{FractionSchedule, RecycleSchedule, SelectionStrategy};
use crate::rng;

/// Episodes (or epochs) averaged into a run's final score.
pub const FINAL_WINDOW: usize = 100;
/// States used for the end-of-run effective-rank probe.
pub const RANK_BATCH: usize = 256;
pub const RANK_DELTA: f64 = 0.01;

/// What runs inside one cell.
#[derive(Clone, Debug, PartialEq)]
pub enum CellKind {
    Online {
        dqn: DqnConfig,
        intervention: Intervention,
        prune: bool,
    },
    Supervised {
        shuffled: bool,
    },
    OfflineBuffer,
    RandomTargets,
    Distill {
        pretrained: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Intervention {
    None,
    Redo,
    Reset,
    /// Fixed-fraction selection on the cosine schedule.
    Selection(SelectionStrategy),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellPlan {
    pub variant: String,
    pub seed: u64,
    pub kind: CellKind,
}

impl CellPlan {
    pub fn dir(&self) -> PathBuf {
        PathBuf::from(&self.variant).join(format!("seed_{}", self.seed))
    }
}

/// Every (variant, seed) cell a recipe runs, in manifest order.
pub fn plan_cells(config: &ExperimentConfig) -> Vec<CellPlan> {
    let online = |dqn: DqnConfig, intervention| CellKind::Online {
        dqn,
        intervention,
        prune: false,
    };
    let base = config.dqn.clone();
    let variants: Vec<(String, CellKind)> = match config.recipe {
        Recipe::DormancyGrowth => vec![("dqn".into(), online(base, Intervention::None))],
        Recipe::SupervisedNonstationary => vec![
            ("fixed".into(), CellKind::Supervised { shuffled: false }),
            ("shuffled".into(), CellKind::Supervised { shuffled: true }),
        ],
        Recipe::OfflineFixedBuffer => vec![("offline".into(), CellKind::OfflineBuffer)],
        Recipe::FixedRandomTargets => vec![("random_targets".into(), CellKind::RandomTargets)],
        Recipe::RrSweep => {
            let mut v = Vec::new();
            for &rr in &config.sweep.replay_ratios {
                let dqn = DqnConfig {
                    replay_ratio: rr,
                    ..base.clone()
                };
                v.push((format!("rr_{rr}"), online(dqn.clone(), Intervention::None)));
                if config.sweep.with_redo {
                    v.push((format!("rr_{rr}_redo"), online(dqn, Intervention::Redo)));
                }
            }
            v
        }
        Recipe::RedoMitigation => vec![
            ("dqn".into(), online(base.clone(), Intervention::None)),
            ("dqn_redo".into(), online(base, Intervention::Redo)),
        ],
        Recipe::LrScaled => {
            let at_rr1 = DqnConfig {
                replay_ratio: 1.0,
                ..base
            };
            let scaled = DqnConfig {
                learning_rate: at_rr1.learning_rate / config.sweep.lr_divisor,
                ..at_rr1.clone()
            };
            vec![
                ("dqn".into(), online(at_rr1.clone(), Intervention::None)),
                (format!("dqn_lr_div{}", config.sweep.lr_divisor), online(scaled, Intervention::None)),
                ("dqn_redo".into(), online(at_rr1, Intervention::Redo)),
            ]
        }
        Recipe::WidthSweep => {
            let mut v = Vec::new();
            for &m in &config.sweep.width_multipliers {
                let dqn = DqnConfig {
                    hidden: base.hidden.iter().map(|h| h * m).collect(),
                    ..base.clone()
                };
                v.push((format!("width_x{m}"), online(dqn.clone(), Intervention::None)));
                v.push((format!("width_x{m}_redo"), online(dqn, Intervention::Redo)));
            }
            v
        }
        Recipe::BaselineCompare => vec![
            ("dqn".into(), online(base.clone(), Intervention::None)),
            ("redo".into(), online(base.clone(), Intervention::Redo)),
            ("reset".into(), online(base.clone(), Intervention::Reset)),
            (
                "weight_decay".into(),
                online(
                    DqnConfig {
                        weight_decay: config.recycle.weight_decay,
                        ..base
                    },
                    Intervention::None,
                ),
            ),
        ],
        Recipe::SelectionCompare => {
            let f = config.recycle.cosine_start;
            [
                ("redo_score", SelectionStrategy::LowestScore { fraction: f }),
                ("inverse_score", SelectionStrategy::InverseScore { fraction: f }),
                ("random", SelectionStrategy::Random { fraction: f }),
                ("utility", SelectionStrategy::Utility { fraction: f }),
            ]
            .into_iter()
            .map(|(name, s)| (name.to_string(), online(base.clone(), Intervention::Selection(s))))
            .collect()
        }
        Recipe::DistillProbe => vec![
            ("pretrained_init".into(), CellKind::Distill { pretrained: true }),
            ("fresh_init".into(), CellKind::Distill { pretrained: false }),
        ],
        Recipe::PruneProbe => vec![(
            "dqn_prune".into(),
            CellKind::Online {
                dqn: base,
                intervention: Intervention::None,
                prune: true,
            },
        )],
    };
    variants
        .into_iter()
        .flat_map(|(variant, kind)| {
            config.seeds.iter().map(move |&seed| CellPlan {
                variant: variant.clone(),
                seed,
                kind: kind.clone(),
            })
        })
        .collect()
}

/// Gradient steps an online run performs in total.
pub fn planned_grad_steps(dqn: &DqnConfig) -> u64 {
    let post = dqn.total_env_steps.saturating_sub(dqn.min_history) as u64;
    (1..=post).map(|p| dqn.updates_after_env_step(p)).sum()
}

/// The log and summary of one finished cell.
pub struct CellResult {
    pub series: MetricSeries,
    pub summary: CellSummary,
}

fn probe(config: &ExperimentConfig, trigger: Trigger, batch_size: usize, seed: u64) -> Box<dyn TrainingHook> {
    Box::new(DormancyProbe::new(
        trigger,
        config.taus.clone(),
        config.primary_tau,
        batch_size,
        seed,
    ))
}

fn rank_of(net: &Network, states: &dyn StateSource, seed: u64) -> Result<Option<usize>> {
    let mut r = rng::seeded(seed, rng::stream::BOOTSTRAP);
    let batch = states.sample_states(RANK_BATCH, &mut r)?;
    let features = penultimate_features(net, &batch)?;
    Ok(effective_rank(&features, RANK_DELTA).ok())
}

fn summarize(
    plan: &CellPlan,
    config: &ExperimentConfig,
    series: &MetricSeries,
    env_steps: u64,
    grad_steps: u64,
    window: usize,
    effective_rank: Option<usize>,
) -> CellSummary {
    let losses: Vec<f64> = series.rows.iter().filter_map(|r| r.loss).collect();
    CellSummary {
        variant: plan.variant.clone(),
        seed: plan.seed,
        env_steps,
        grad_steps,
        final_return: series.final_return(window),
        final_loss: losses.last().copied(),
        final_dormant_frac_tau0: series.final_dormant_fraction(0.0),
        final_dormant_frac_tau: series.final_dormant_fraction(config.primary_tau),
        effective_rank,
    }
}

/// Runs a single cell without touching the filesystem (except to read
/// distillation checkpoints).
pub fn run_cell(config: &ExperimentConfig, plan: &CellPlan) -> Result<CellResult> {
    let seed = plan.seed;
    let env = &config.env;
    match &plan.kind {
        CellKind::Online {
            dqn,
            intervention,
            prune,
        } => {
            let mut hooks = vec![probe(config, Trigger::EveryGradSteps(config.probe.period), config.probe.batch_size, seed)];
            let rc = &config.recycle;
            match *intervention {
                Intervention::None => {}
                Intervention::Redo => hooks.push(Box::new(Recycler::new(
                    RecycleSchedule::every(rc.period),
                    SelectionStrategy::Threshold { tau: rc.tau },
                    rc.strategy,
                    rc.batch_size,
                    seed,
                ))),
                Intervention::Reset => {
                    hooks.push(Box::new(LayerReset::new(rc.reset_period, rc.reset_k, seed)))
                }
                Intervention::Selection(selection) => {
                    let horizon = rc.cosine_horizon.unwrap_or_else(|| planned_grad_steps(dqn)).max(1);
                    hooks.push(Box::new(Recycler::new(
                        RecycleSchedule {
                            period: rc.period,
                            fraction_schedule: FractionSchedule::Cosine {
                                start: rc.cosine_start,
                                horizon,
                            },
                        },
                        selection,
                        rc.strategy,
                        rc.batch_size,
                        seed,
                    )))
                }
            }
            if *prune {
                hooks.push(Box::new(PruneProbe::new(
                    config.prune.period,
                    *env,
                    config.prune.eval_episodes,
                    seed,
                )));
            }
            let out = run_training(env, dqn, seed, &mut hooks)?;
            let rank = rank_of(&out.agent.online, &out.agent.buffer, seed)?;
            let summary = summarize(
                plan,
                config,
                &out.series,
                out.agent.env_steps,
                out.agent.grad_steps,
                FINAL_WINDOW,
                rank,
            );
            Ok(CellResult {
                series: out.series,
                summary,
            })
        }
        CellKind::Supervised { shuffled } => {
            let sc = &config.supervised;
            let task = match &sc.dataset {
                Some(path) => load_classification_csv(path)?,
                None => make_classification_task(sc.n_samples, sc.dim, sc.n_classes, sc.noise, seed)?,
            };
            let mut train = sc.train.clone();
            train.shuffle_every = shuffled.then_some(sc.shuffle_every);
            let mut hooks = vec![probe(config, Trigger::EveryEpoch, 0, seed)];
            let out = run_supervised(&task, &train, seed, &mut hooks)?;
            let rank = rank_of(&out.network, &task.inputs, seed)?;
            let grad_steps = out.series.rows.last().map_or(0, |r| r.step_grad);
            let summary = summarize(plan, config, &out.series, 0, grad_steps, 1, rank);
            Ok(CellResult {
                series: out.series,
                summary,
            })
        }
        CellKind::OfflineBuffer => {
            let oc = &config.offline;
            let buffer = collect_random(env, oc.buffer_steps, config.dqn.n_step, seed)?;
            let mut hooks = vec![probe(config, Trigger::EveryGradSteps(config.probe.period), config.probe.batch_size, seed)];
            let out = run_offline(
                buffer,
                OfflineTargets::Bootstrap,
                &config.dqn,
                oc.grad_steps,
                oc.log_every,
                seed,
                env.obs_dim(),
                env.n_actions(),
                &mut hooks,
            )?;
            let rank = rank_of(&out.agent.online, &out.agent.buffer, seed)?;
            let summary = summarize(plan, config, &out.series, 0, out.agent.grad_steps, FINAL_WINDOW, rank);
            Ok(CellResult {
                series: out.series,
                summary,
            })
        }
        CellKind::RandomTargets => {
            let oc = &config.offline;
            let inputs = collect_random(env, oc.buffer_steps, 1, seed)?.all_states()?;
            let specs = config.dqn.layer_specs(env.obs_dim(), env.n_actions());
            let task = RegressionTask::random_teacher(inputs, &specs, oc.teacher_seed)?;
            let agent = AgentState::new(&config.dqn, env.obs_dim(), env.n_actions(), seed)?;
            frozen_targets_cell(config, plan, agent, &task)
        }
        CellKind::Distill { pretrained } => {
            let oc = &config.offline;
            let (teacher_path, student_path) = match (&oc.teacher, &oc.pretrained) {
                (Some(t), Some(p)) => (t, p),
                _ => {
                    return Err(Error::Config(
                        "distill_probe needs offline.teacher and offline.pretrained".into(),
                    ))
                }
            };
            let teacher = load_checkpoint(teacher_path)?;
            let pretrained_net = load_checkpoint(student_path)?;
            for (what, net) in [("teacher", &teacher), ("pretrained", &pretrained_net)] {
                if net.input_dim() != env.obs_dim() || net.output_dim() != env.n_actions() {
                    return Err(shape_err(
                        if what == "teacher" { "teacher checkpoint" } else { "pretrained checkpoint" },
                        format!("{} -> {}", env.obs_dim(), env.n_actions()),
                        format!("{} -> {}", net.input_dim(), net.output_dim()),
                    ));
                }
            }
            let inputs = collect_random(env, oc.buffer_steps, 1, seed)?.all_states()?;
            let task = RegressionTask::from_teacher(inputs, &teacher)?;
            let student = if *pretrained {
                pretrained_net
            } else {
                Network::build(&pretrained_net.specs(), seed)?
            };
            let agent = AgentState::from_network(&config.dqn, student, seed)?;
            frozen_targets_cell(config, plan, agent, &task)
        }
    }
}

fn frozen_targets_cell(
    config: &ExperimentConfig,
    plan: &CellPlan,
    agent: AgentState,
    task: &RegressionTask,
) -> Result<CellResult> {
    let oc = &config.offline;
    let mut hooks = vec![probe(config, Trigger::EveryGradSteps(config.probe.period), config.probe.batch_size, plan.seed)];
    let out = run_offline_from(
        agent,
        OfflineTargets::Frozen(task),
        &config.dqn,
        oc.grad_steps,
        oc.log_every,
        plan.seed,
        &mut hooks,
    )?;
    let rank = rank_of(&out.agent.online, &task.inputs, plan.seed)?;
    let summary = summarize(plan, config, &out.series, 0, out.agent.grad_steps, FINAL_WINDOW, rank);
    Ok(CellResult {
        series: out.series,
        summary,
    })
}

/// Runs every cell of the recipe and writes the result tree under `out`:
/// `config.toml`, one `<variant>/seed_<s>/` directory per cell, and finally
/// `manifest.json`. `jobs > 1` runs cells concurrently.
pub fn run_recipe(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), config.to_toml()?)?;
    let plans = plan_cells(config);
    let total = plans.len();
    let run_one = |(i, plan): (usize, &CellPlan)| -> Result<ManifestCell> {
        let result = run_cell(config, plan)?;
        let dir = out.join(plan.dir());
        write_series(&dir, &result.series)?;
        write_json(&dir.join(SUMMARY_FILE), &result.summary)?;
        eprintln!(
            "[{}/{}] {} seed {} done (final return {})",
            i + 1,
            total,
            plan.variant,
            plan.seed,
            result
                .summary
                .final_return
                .map_or_else(|| "n/a".to_string(), |r| format!("{r:.3}"))
        );
        Ok(ManifestCell {
            variant: plan.variant.clone(),
            seed: plan.seed,
            dir: plan.dir(),
        })
    };
    let cells: Vec<ManifestCell> = if jobs <= 1 {
        plans.iter().enumerate().map(run_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| plans.par_iter().enumerate().map(run_one).collect::<Result<_>>())?
    };
    let manifest = Manifest {
        recipe: config.recipe.name().to_string(),
        n_cells: cells.len(),
        cells,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
