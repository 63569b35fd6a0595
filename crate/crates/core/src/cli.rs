//! Command-line front end: `run`, `sweep`, `analyze`, `validate`, `demo`.
//!
//! Exit codes are 0 on success, 1 for configuration errors and 2 for runtime
//! failures. Progress goes to stderr; results only to files.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agent::{
    run_training_from, AgentState, DormancyProbe, DqnConfig, Recycler, TrainingHook, Trigger,
};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::experiments::{
    analyze, load_config, parse_config, run_recipe, AnalyzeOptions,
    ExperimentConfig, FinalMetric, GroupBy,
};
use crate::metrics::Statistic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "redo-lab", version, about = "Dormant-neuron experiments for small DQN agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one recipe, cells in sequence.
    Run(RunArgs),
    /// Run a recipe's cells in parallel, optionally crossed with a grid of overrides.
    Sweep(SweepArgs),
    /// Aggregate a finished output directory into report.json and plot CSVs.
    Analyze(AnalyzeArgs),
    /// Check a config and print the resolved version; writes nothing.
    Validate(ConfigArgs),
    /// Short live Catch run with ReDo, printing the dormant fraction.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `key.path=value`, applied after the file is parsed. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Comma-separated seeds; replaces the config's list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory; falls back to `out_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// `key.path=v1,v2,...`; every combination runs into its own subdirectory.
    #[arg(long = "grid", value_name = "KEY=V1,V2")]
    pub grid: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StatArg {
    Iqm,
    Mean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MetricArg {
    Return,
    Loss,
    DormantFraction,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GroupArg {
    Variant,
    Seed,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// A directory written by `run` or `sweep`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "variant")]
    pub group_by: GroupArg,
    #[arg(long, value_enum, default_value = "iqm")]
    pub statistic: StatArg,
    #[arg(long, value_enum, default_value = "return")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = crate::experiments::FINAL_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "bootstrap", default_value_t = 2000)]
    pub b: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 60)]
    pub seconds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4.0)]
    pub replay_ratio: f64,
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::UnknownRecipe(_))
}

fn exit_code(e: &Error) -> i32 {
    if is_config_error(e) {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig> {
    if !args.config.exists() {
        return Err(Error::Config(format!("config file {} not found", args.config.display())));
    }
    let mut config = load_config(&args.config, &args.overrides)?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
        config.validate()?;
    }
    Ok(config)
}

fn out_dir(args: &RunArgs, config: &ExperimentConfig) -> Result<PathBuf> {
    args.out
        .clone()
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))
}

/// Expands `key=v1,v2` grid axes into override lists and subdirectory names.
pub fn grid_points(grid: &[String]) -> Result<Vec<(String, Vec<String>)>> {
    let mut points: Vec<(String, Vec<String>)> = vec![(String::new(), Vec::new())];
    for axis in grid {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis `{axis}` is not key=v1,v2")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("grid axis `{key}` has no values")));
        }
        points = points
            .into_iter()
            .flat_map(|(name, ovs)| {
                values.iter().map(move |v| {
                    let part = format!("{key}={v}");
                    let name = if name.is_empty() { part.clone() } else { format!("{name}__{part}") };
                    let mut ovs = ovs.clone();
                    ovs.push(part);
                    (name, ovs)
                })
            })
            .collect();
    }
    Ok(points)
}

fn cmd_run(args: &RunArgs, jobs: usize) -> Result<()> {
    let config = resolve(&args.config)?;
    let out = out_dir(args, &config)?;
    let manifest = run_recipe(&config, &out, jobs)?;
    eprintln!("{} cells written to {}", manifest.n_cells, out.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    if args.grid.is_empty() {
        return cmd_run(&args.run, args.jobs);
    }
    let base = resolve(&args.run.config)?;
    let out = out_dir(&args.run, &base)?;
    let points = grid_points(&args.grid)?;
    // Validate every grid point before running any of them.
    let mut configs = Vec::new();
    for (name, ovs) in &points {
        let mut all = args.run.config.overrides.clone();
        all.extend(ovs.iter().cloned());
        let text = std::fs::read_to_string(&args.run.config.config)?;
        let mut c = parse_config(&text, &all)?;
        c.seeds = base.seeds.clone();
        c.validate()?;
        configs.push((name.clone(), c));
    }
    for (name, c) in &configs {
        eprintln!("grid point {name}");
        run_recipe(c, &out.join(name), args.jobs)?;
    }
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let opts = AnalyzeOptions {
        group_by: match args.group_by {
            GroupArg::Variant => GroupBy::Variant,
            GroupArg::Seed => GroupBy::Seed,
        },
        statistic: match args.statistic {
            StatArg::Iqm => Statistic::Iqm,
            StatArg::Mean => Statistic::Mean,
        },
        metric: match args.metric {
            MetricArg::Return => FinalMetric::Return,
            MetricArg::Loss => FinalMetric::Loss,
            MetricArg::DormantFraction => FinalMetric::DormantFraction,
        },
        window: args.window,
        tau: args.tau,
        b: args.b,
        alpha: args.alpha,
        seed: args.seed,
    };
    let report = analyze(&args.out, &opts)?;
    for g in &report.groups {
        eprintln!(
            "{:<24} {} {:.4} [{:.4}, {:.4}] n={}{}",
            g.group,
            g.report.statistic.name(),
            g.report.point,
            g.report.ci_lo,
            g.report.ci_hi,
            g.report.n_seeds,
            if g.report.degenerate { " (degenerate)" } else { "" }
        );
    }
    Ok(())
}

fn cmd_validate(args: &ConfigArgs) -> Result<()> {
    let config = resolve(args)?;
    eprintln!(
        "config ok: recipe {} with {} seeds",
        config.recipe.name(),
        config.seeds.len()
    );
    print!("{}", config.to_toml()?);
    Ok(())
}

/// Trains on Catch with ReDo in chunks until `seconds` have passed, printing
/// the latest dormant fractions after each chunk.
pub fn demo(seconds: u64, seed: u64, replay_ratio: f64) -> Result<()> {
    let env = EnvSpec::catch();
    let mut config = DqnConfig {
        replay_ratio,
        total_env_steps: 2000,
        ..DqnConfig::default()
    };
    config.validate()?;
    let deadline = Instant::now() + Duration::from_secs(seconds);
    let mut agent = AgentState::new(&config, env.obs_dim(), env.n_actions(), seed)?;
    let mut hooks: Vec<Box<dyn TrainingHook>> = vec![
        Box::new(DormancyProbe::new(Trigger::EveryGradSteps(500), vec![0.1], 0.025, 64, seed)),
        Box::new(Recycler::redo(0.1, 1000, 64, seed)),
    ];
    let mut chunk = 0u64;
    while Instant::now() < deadline {
        let out = run_training_from(&env, &config, seed.wrapping_add(chunk), agent, &mut hooks)?;
        agent = out.agent;
        let last = out.series.rows.last();
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |f| format!("{:.3}", f));
        eprintln!(
            "env {:>7} grad {:>7}  return(last 50) {:>6}  dormant τ=0 {:>6}  τ=0.025 {:>6}  recycled {}",
            agent.env_steps,
            agent.grad_steps,
            fmt(out.series.final_return(50)),
            fmt(last.and_then(|r| r.dormant_frac_tau0)),
            fmt(last.and_then(|r| r.dormant_frac_tau)),
            last.map_or(0, |r| r.recycled_count),
        );
        // Later chunks continue from a full buffer; keep the smallest legal warm-up.
        config.min_history = config.batch_size;
        chunk += 1;
    }
    Ok(())
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, 1),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Demo(a) => demo(a.seconds, a.seed, a.replay_ratio),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == EXIT_CONFIG { "config error" } else { "error" };
            eprintln!("{kind}: {e}");
            code
        }
    }
}

/// Parses `argv` and runs it. Usage errors exit 1 like other config errors.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
