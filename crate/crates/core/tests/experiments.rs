//! Recipe planning, byte-level determinism, output layout and analysis.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use redo_lab::agent::{run_supervised, DqnConfig, MetricRow, MetricSeries, SupervisedConfig};
use redo_lab::envs::make_classification_task;
use redo_lab::experiments::{
    analyze, parse_config, plan_cells, read_json, read_series, run_recipe, write_json,
    write_series, AnalysisReport, AnalyzeOptions, CellSummary, ExperimentConfig, FinalMetric,
    Manifest, ManifestCell, Recipe, MANIFEST_FILE, REPORT_FILE, SUMMARY_FILE,
};
use redo_lab::nn::{save_checkpoint, Network};

fn tiny(recipe: Recipe, seeds: Vec<u64>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(recipe, seeds);
    c.dqn = DqnConfig {
        total_env_steps: 400,
        min_history: 64,
        batch_size: 16,
        buffer_capacity: 1000,
        hidden: vec![12, 12],
        ..DqnConfig::default()
    };
    c.probe.period = 40;
    c.probe.batch_size = 16;
    c.recycle.period = 50;
    c.recycle.reset_period = 100;
    c.recycle.batch_size = 16;
    c.sweep.replay_ratios = vec![0.5, 2.0];
    c.sweep.width_multipliers = vec![1, 2];
    c.supervised.n_samples = 60;
    c.supervised.dim = 4;
    c.supervised.n_classes = 3;
    c.supervised.shuffle_every = 2;
    c.supervised.train.epochs = 6;
    c.supervised.train.batch_size = 16;
    c.supervised.train.hidden = vec![8];
    c.offline.buffer_steps = 200;
    c.offline.grad_steps = 120;
    c.offline.log_every = 20;
    c.prune.period = 100;
    c.prune.eval_episodes = 3;
    c
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn with_checkpoints(dir: &Path, mut c: ExperimentConfig) -> ExperimentConfig {
    let specs = c.dqn.layer_specs(c.env.obs_dim(), c.env.n_actions());
    let teacher = dir.join("teacher.bin");
    let student = dir.join("student.bin");
    save_checkpoint(&Network::build(&specs, 1).unwrap(), &teacher).unwrap();
    save_checkpoint(&Network::build(&specs, 2).unwrap(), &student).unwrap();
    c.offline.teacher = Some(teacher);
    c.offline.pretrained = Some(student);
    c
}

#[test]
fn every_recipe_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for recipe in Recipe::ALL {
        let mut c = tiny(recipe, vec![0, 1]);
        if recipe == Recipe::DistillProbe {
            c = with_checkpoints(tmp.path(), c);
        }
        let a = tmp.path().join(format!("{}_a", recipe.name()));
        let b = tmp.path().join(format!("{}_b", recipe.name()));
        let m = run_recipe(&c, &a, 1).unwrap();
        run_recipe(&c, &b, 2).unwrap();
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
        for (k, v) in &sa {
            assert!(v == &sb[k], "{}: {} differs", recipe.name(), k.display());
        }
        assert!(sa.keys().any(|k| k.extension().is_some_and(|e| e == "csv")));
        assert_eq!(m.n_cells, plan_cells(&c).len());
        assert_eq!(m.cells.len(), m.n_cells);
        for cell in &m.cells {
            let summary: CellSummary = read_json(&a.join(&cell.dir).join(SUMMARY_FILE)).unwrap();
            assert_eq!((summary.variant.as_str(), summary.seed), (cell.variant.as_str(), cell.seed));
            read_series(&a.join(&cell.dir)).unwrap();
        }
    }
}

#[test]
fn rr_sweep_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(Recipe::RrSweep, vec![3, 4]);
    let m = run_recipe(&c, tmp.path(), 1).unwrap();
    assert_eq!(m.n_cells, 4);
    let manifest: Manifest = read_json(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest, m);
    let variants: Vec<&str> = m.cells.iter().map(|c| c.variant.as_str()).collect();
    assert_eq!(variants, ["rr_0.5", "rr_0.5", "rr_2", "rr_2"]);
    for cell in &m.cells {
        let s: CellSummary = read_json(&tmp.path().join(&cell.dir).join(SUMMARY_FILE)).unwrap();
        assert_eq!(s.env_steps, 400);
        let want = if cell.variant == "rr_2" { 672 } else { 168 };
        assert_eq!(s.grad_steps, want);
        let series = read_series(&tmp.path().join(&cell.dir)).unwrap();
        assert!(series.rows.windows(2).all(|w| w[0].step_grad <= w[1].step_grad));
        assert!(series.rows.iter().all(|r| r.seed == cell.seed));
    }
    let echoed = parse_config(&fs::read_to_string(tmp.path().join("config.toml")).unwrap(), &[]).unwrap();
    assert_eq!(echoed, c);
}

fn fake_run(dir: &Path, cells: &[(&str, u64, Vec<f64>)]) {
    let mut manifest = Manifest {
        recipe: "rr_sweep".into(),
        n_cells: cells.len(),
        cells: Vec::new(),
    };
    for (variant, seed, returns) in cells {
        let rel = PathBuf::from(variant).join(format!("seed_{seed}"));
        let series = MetricSeries {
            rows: returns
                .iter()
                .enumerate()
                .map(|(i, &r)| MetricRow {
                    step_env: i as u64 * 9,
                    step_grad: i as u64,
                    episode: i as u64,
                    episode_return: Some(r),
                    loss: Some(0.5),
                    dormant_frac_tau0: None,
                    dormant_frac_tau: None,
                    recycled_count: 0,
                    seed: *seed,
                })
                .collect(),
            ..Default::default()
        };
        write_series(&dir.join(&rel), &series).unwrap();
        manifest.cells.push(ManifestCell {
            variant: variant.to_string(),
            seed: *seed,
            dir: rel,
        });
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest).unwrap();
}

#[test]
fn analyze_known_answers() {
    let tmp = tempfile::tempdir().unwrap();
    fake_run(
        tmp.path(),
        &[
            ("a", 0, vec![1.0]),
            ("a", 1, vec![2.0]),
            ("a", 2, vec![3.0]),
            ("a", 3, vec![4.0]),
            ("single", 0, vec![0.0, 5.0]),
            ("dup", 0, vec![0.25]),
            ("dup", 1, vec![0.25]),
            ("dup", 2, vec![0.25]),
        ],
    );
    let report = analyze(tmp.path(), &AnalyzeOptions::default()).unwrap();
    let g = |name: &str| &report.groups.iter().find(|g| g.group == name).unwrap().report;
    assert_eq!(g("a").point, 2.5);
    assert!(g("single").degenerate);
    assert_eq!((g("single").point, g("single").ci_lo, g("single").ci_hi), (2.5, 2.5, 2.5));
    assert_eq!((g("dup").ci_lo, g("dup").ci_hi), (0.25, 0.25));
    assert!(!g("dup").degenerate);
    let written: AnalysisReport = read_json(&tmp.path().join(REPORT_FILE)).unwrap();
    assert_eq!(written, report);

    let last = analyze(tmp.path(), &AnalyzeOptions { window: 1, ..Default::default() }).unwrap();
    assert_eq!(last.groups.iter().find(|g| g.group == "single").unwrap().report.point, 5.0);

    let err = analyze(tmp.path(), &AnalyzeOptions { metric: FinalMetric::DormantFraction, ..Default::default() });
    assert!(err.is_err());
}

#[test]
fn analyze_groups_by_replay_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(Recipe::RrSweep, vec![0, 1, 2]);
    run_recipe(&c, tmp.path(), 1).unwrap();
    let report = analyze(tmp.path(), &AnalyzeOptions::default()).unwrap();
    let names: Vec<&str> = report.groups.iter().map(|g| g.group.as_str()).collect();
    assert_eq!(names, ["rr_0.5", "rr_2"]);
    assert!(report.groups.iter().all(|g| g.report.n_seeds == 3 && g.report.ci_lo <= g.report.ci_hi));
    let dorm = analyze(tmp.path(), &AnalyzeOptions { metric: FinalMetric::DormantFraction, ..Default::default() }).unwrap();
    assert!(dorm.groups.iter().all(|g| (0.0..=1.0).contains(&g.report.point)));
}

#[test]
fn supervised_logs_every_epoch_and_counts_shuffles() {
    use redo_lab::agent::{DormancyProbe, TrainingHook, Trigger};
    let task = make_classification_task(90, 5, 3, 0.5, 2).unwrap();
    let config = SupervisedConfig {
        epochs: 7,
        batch_size: 32,
        hidden: vec![6, 6],
        shuffle_every: Some(3),
        ..SupervisedConfig::default()
    };
    let mut hooks: Vec<Box<dyn TrainingHook>> =
        vec![Box::new(DormancyProbe::new(Trigger::EveryEpoch, vec![0.0, 0.1], 0.1, 0, 2))];
    let out = run_supervised(&task, &config, 2, &mut hooks).unwrap();
    assert_eq!(out.series.rows.len(), 7);
    assert_eq!(out.series.rows.iter().map(|r| r.episode).collect::<Vec<_>>(), (1..=7).collect::<Vec<_>>());
    // One row per epoch × hidden layer × τ.
    assert_eq!(out.series.dormancy.len(), 7 * 2 * 2);
    assert!(out.series.rows.iter().all(|r| r.dormant_frac_tau0.is_some()));
    assert_eq!(out.task.label_epoch, 2);
    assert_eq!(out.task.input_hash(), task.input_hash());

    let fixed = run_supervised(&task, &SupervisedConfig { shuffle_every: None, ..config }, 2, &mut []).unwrap();
    assert_eq!(fixed.task.label_epoch, 0);
    assert_eq!(fixed.task.labels, task.labels);
}

#[test]
fn distill_without_checkpoints_is_a_config_error() {
    let c = tiny(Recipe::DistillProbe, vec![0]);
    let err = c.validate().unwrap_err();
    assert!(matches!(err, redo_lab::Error::Config(_)));
}
