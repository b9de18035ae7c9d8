//! Command-line front end: run a single policy, train the residual agent,
//! evaluate a checkpoint, sweep a scenario axis, or compare policies.
//!
//! Exit codes: 0 success, 1 configuration problem, 2 runtime failure.

use clap::{Args, Parser, Subcommand};
use leoroute_core::policies::PolicyKind;
use leoroute_core::rl::train::{train, TrainConfig};
use leoroute_core::sim::config::RunConfig;
use leoroute_core::sim::episode::Scenario;
use leoroute_core::sim::experiment::{run_compare, run_experiment, run_sweep, PolicySpec, SweepAxis};
use leoroute_core::sim::{output, SimError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "leoroute", about = "Slotted LEO-to-ground routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the TOML run configuration.
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Override the configured seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy over all seeds and write metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Override the configured policy name.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Train the residual agent and write a checkpoint plus training log.
    Train {
        #[command(flatten)]
        common: Common,
        /// Override the configured episode count.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a trained checkpoint against the LG-aware baseline.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; defaults to `<out_dir>/<rl.checkpoint>`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep one scenario axis, rerunning the configured policy per point.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis: `max-neighbors`, `num-satellites`, `gateway-preset`,
        /// or `constellation`.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
    },
    /// Run several policies on identical per-seed environments.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated policy names; defaults to all non-learned ones.
        #[arg(long)]
        policies: Option<String>,
        /// Checkpoint for `rl-residual` when it is in the list.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, SimError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.run.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.run.out_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn read_checkpoint(path: &Path) -> Result<String, SimError> {
    std::fs::read_to_string(path).map_err(|e| SimError::Io(path.display().to_string(), e))
}

fn default_checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir().join(&cfg.rl.checkpoint)
}

fn cmd_run(common: &Common, policy: &Option<String>) -> Result<(), SimError> {
    let mut cfg = load_config(common)?;
    if let Some(name) = policy {
        cfg.policy.name = name.clone();
        PolicyKind::parse(name).map_err(|e| SimError::Scenario(e.to_string()))?;
    }
    let scn = Scenario::from_config(&cfg)?;
    let checkpoint = if cfg.policy.name == "rl-residual" {
        Some(read_checkpoint(&default_checkpoint_path(&cfg))?)
    } else {
        None
    };
    let spec = PolicySpec::from_config(&cfg, checkpoint)?;
    let report = run_experiment(&scn, &cfg.run.seeds, &spec)?;
    output::emit_run(&cfg.out_dir(), &cfg.snapshot(), &report)?;
    let (mq, mq_std) = report.time_avg_mean_q();
    println!(
        "policy {} over {} seeds: time-avg mean queue {:.3} (std {:.3}), delivery {:.4}",
        report.policy,
        cfg.run.seeds.len(),
        mq,
        mq_std,
        report.delivery_ratio().0
    );
    Ok(())
}

fn cmd_train(common: &Common, episodes: &Option<usize>) -> Result<(), SimError> {
    let mut cfg = load_config(common)?;
    if let Some(e) = episodes {
        cfg.rl.episodes = *e;
    }
    let scn = Scenario::from_config(&cfg)?;
    let seed = cfg.run.seeds[0];
    let tc = TrainConfig::from_sections(&cfg.rl, &cfg.policy, seed);
    let (net, logs) = train(&scn, &tc)?;
    output::emit_training(
        &cfg.out_dir(),
        &cfg.snapshot(),
        &net.to_checkpoint(),
        &cfg.rl.checkpoint,
        &logs,
    )?;
    let first = logs.first().map(|l| l.cumulative_reward).unwrap_or(0.0);
    let last = logs.last().map(|l| l.cumulative_reward).unwrap_or(0.0);
    println!(
        "trained {} episodes (seed {seed}): episode reward {:.3} -> {:.3}, checkpoint {}",
        logs.len(),
        first,
        last,
        default_checkpoint_path(&cfg).display()
    );
    Ok(())
}

fn cmd_eval(common: &Common, checkpoint: &Option<PathBuf>) -> Result<(), SimError> {
    let cfg = load_config(common)?;
    let scn = Scenario::from_config(&cfg)?;
    let path = checkpoint.clone().unwrap_or_else(|| default_checkpoint_path(&cfg));
    let text = read_checkpoint(&path)?;
    let spec = PolicySpec::from_config(&cfg, Some(text))?;
    let reports = run_compare(
        &scn,
        &cfg.run.seeds,
        &spec,
        &[PolicyKind::LgBp, PolicyKind::RlResidual],
    )?;
    output::emit_compare(&cfg.out_dir(), &cfg.snapshot(), &reports)?;
    for r in &reports {
        let (mq, mq_std) = r.time_avg_mean_q();
        println!("{:12} time-avg mean queue {:.3} (std {:.3})", r.policy, mq, mq_std);
    }
    Ok(())
}

fn parse_axis(axis: &str, values: &str) -> Result<SweepAxis, SimError> {
    let items: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(SimError::Scenario("empty sweep value list".to_string()));
    }
    let parse_usize = |items: &[&str]| -> Result<Vec<usize>, SimError> {
        items
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| SimError::Scenario(format!("bad sweep value `{s}`")))
            })
            .collect()
    };
    match axis {
        "max-neighbors" => Ok(SweepAxis::MaxNeighbors(parse_usize(&items)?)),
        "num-satellites" => Ok(SweepAxis::NumSatellites(parse_usize(&items)?)),
        "gateway-preset" => {
            Ok(SweepAxis::GatewayPreset(items.iter().map(|s| s.to_string()).collect()))
        }
        "constellation" => {
            Ok(SweepAxis::Constellation(items.iter().map(|s| s.to_string()).collect()))
        }
        other => Err(SimError::Scenario(format!("unknown sweep axis `{other}`"))),
    }
}

fn cmd_sweep(common: &Common, axis: &str, values: &str) -> Result<(), SimError> {
    let cfg = load_config(common)?;
    let axis = parse_axis(axis, values)?;
    let checkpoint = if cfg.policy.name == "rl-residual" {
        Some(read_checkpoint(&default_checkpoint_path(&cfg))?)
    } else {
        None
    };
    let rows = run_sweep(&cfg, &axis, checkpoint)?;
    output::emit_sweep(&cfg.out_dir(), &cfg.snapshot(), &rows)?;
    for r in &rows {
        println!(
            "{}={}: time-avg mean queue {:.3} (std {:.3})",
            r.axis, r.value, r.time_avg_mean_q, r.time_avg_mean_q_std
        );
    }
    Ok(())
}

fn cmd_compare(
    common: &Common,
    policies: &Option<String>,
    checkpoint: &Option<PathBuf>,
) -> Result<(), SimError> {
    let cfg = load_config(common)?;
    let scn = Scenario::from_config(&cfg)?;
    let kinds: Vec<PolicyKind> = match policies {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| PolicyKind::parse(s).map_err(|e| SimError::Scenario(e.to_string())))
            .collect::<Result<_, _>>()?,
        None => vec![
            PolicyKind::Bp,
            PolicyKind::LgBp,
            PolicyKind::MaxWeight,
            PolicyKind::Equalize,
            PolicyKind::NoIsl,
            PolicyKind::Random,
        ],
    };
    let ckpt_text = if kinds.contains(&PolicyKind::RlResidual) {
        let path = checkpoint.clone().unwrap_or_else(|| default_checkpoint_path(&cfg));
        Some(read_checkpoint(&path)?)
    } else {
        None
    };
    let spec = PolicySpec::from_config(&cfg, ckpt_text)?;
    let reports = run_compare(&scn, &cfg.run.seeds, &spec, &kinds)?;
    output::emit_compare(&cfg.out_dir(), &cfg.snapshot(), &reports)?;
    println!("policy        mean_q    std       max_q     delivery");
    for r in &reports {
        let (mq, mq_std) = r.time_avg_mean_q();
        println!(
            "{:12}  {:<8.3}  {:<8.3}  {:<8.3}  {:.4}",
            r.policy,
            mq,
            mq_std,
            r.time_avg_max_q().0,
            r.delivery_ratio().0
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, policy } => cmd_run(common, policy),
        Command::Train { common, episodes } => cmd_train(common, episodes),
        Command::Eval { common, checkpoint } => cmd_eval(common, checkpoint),
        Command::Sweep { common, axis, values } => cmd_sweep(common, axis, values),
        Command::Compare { common, policies, checkpoint } => {
            cmd_compare(common, policies, checkpoint)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (SimError::Config(_) | SimError::Scenario(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
