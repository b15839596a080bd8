//! duplexsim command-line interface.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use duplexsim::channel::{effective_bandwidth, presets as channel_presets, DuplexMode};
use duplexsim::policy::{PolicyHandle, PolicyParams, POLICY_NAMES};
use duplexsim::workload::presets as workload_presets;
use duplexsim_cli::{builtin, calibrate, compare, config::ExperimentConfig, sweep};

#[derive(Parser)]
#[command(
    name = "duplexsim",
    about = "Deterministic duplex memory channel and scheduling simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write results.csv.
    Sweep {
        /// Experiment config file (TOML, schema = 1).
        #[arg(long, conflicts_with = "builtin")]
        config: Option<PathBuf>,
        /// Built-in experiment name (see `presets list`).
        #[arg(long)]
        builtin: Option<String>,
        /// Override the config's policy list (comma separated).
        #[arg(long, value_delimiter = ',')]
        policy: Vec<String>,
        /// Master seed; overrides DUPLEXSIM_SEED and the config value.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for parallel cells (0 = all cores).
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
    /// Compare policies in a results.csv against a baseline policy.
    Compare {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = sweep::BASELINE_POLICY)]
        baseline: String,
    },
    /// Fit a channel config to measured (read_ratio, gbps) points.
    Calibrate {
        /// Preset name used in the emitted file.
        #[arg(long)]
        name: String,
        /// CSV of read_ratio,gbps rows.
        #[arg(long)]
        targets: PathBuf,
        /// Channel mode to fit.
        #[arg(long, value_parser = parse_mode, default_value = "full-duplex")]
        mode: DuplexMode,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run one simulation and dump the analysis context tree as CSV.
    CaxDump {
        #[arg(long, conflicts_with = "builtin")]
        config: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in presets.
    Presets {
        #[command(subcommand)]
        what: PresetsCommand,
    },
}

#[derive(Subcommand)]
enum PresetsCommand {
    /// Channel, workload, policy and experiment presets.
    List,
}

fn parse_mode(s: &str) -> Result<DuplexMode, String> {
    match s {
        "full-duplex" => Ok(DuplexMode::FullDuplex),
        "half-duplex" => Ok(DuplexMode::HalfDuplex),
        other => Err(format!("unknown mode '{other}' (full-duplex | half-duplex)")),
    }
}

fn load_experiment(config: Option<&PathBuf>, builtin_name: Option<&String>) -> Result<ExperimentConfig> {
    match (config, builtin_name) {
        (Some(path), None) => {
            ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
        }
        (None, Some(name)) => builtin::by_name(name)
            .with_context(|| format!("unknown builtin experiment '{name}' (see `presets list`)")),
        _ => bail!("exactly one of --config or --builtin is required"),
    }
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> u64 {
    if let Some(seed) = flag {
        return seed;
    }
    if let Ok(env) = std::env::var("DUPLEXSIM_SEED") {
        if let Ok(seed) = env.parse() {
            return seed;
        }
    }
    config_seed
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep { config, builtin: builtin_name, policy, seed, out, parallel } => {
            let mut experiment = load_experiment(config.as_ref(), builtin_name.as_ref())?;
            if !policy.is_empty() {
                experiment.experiment.policies = policy;
            }
            let seed = resolve_seed(seed, experiment.experiment.seed);
            if parallel > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(parallel)
                    .build_global()
                    .context("building worker pool")?;
            }
            let output = sweep::run_sweep(&experiment, seed, &out)?;
            println!(
                "wrote {} rows to {}",
                output.rows.len(),
                output.csv_path.display()
            );
            if let Some(path) = output.decisions_path {
                println!("wrote decision log to {}", path.display());
            }
            Ok(())
        }
        Command::Compare { csv, baseline } => {
            let summaries = compare::compare_file(&csv, &baseline)?;
            print!("{}", compare::render(&summaries, &baseline));
            Ok(())
        }
        Command::Calibrate { name, targets, mode, out } => {
            let points = calibrate::read_targets(&targets)?;
            let (report, text) = calibrate::calibrate_preset(&name, &points, mode)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{name}.toml"));
            std::fs::write(&path, text)?;
            println!(
                "fitted {} with max residual {:.2}%; wrote {}",
                name,
                report.max_abs_rel_err * 100.0,
                path.display()
            );
            Ok(())
        }
        Command::CaxDump { config, builtin: builtin_name, seed, out } => {
            let experiment = load_experiment(config.as_ref(), builtin_name.as_ref())?;
            let seed = resolve_seed(seed, experiment.experiment.seed);
            let cells = experiment.cells(seed)?;
            let cell = cells.first().context("experiment has no sweep cells")?;
            let mut sim = cell.sim.clone();
            sim.wrap_tasks_in_scope = true;
            sim.master_seed = seed;
            let params = PolicyParams { cpus: sim.cpus, ..sim.policy_params };
            let mut policy =
                PolicyHandle::by_name(&experiment.experiment.policies[0], params)
                    .map_err(duplexsim::sim::SimError::from)?;
            let result = duplexsim::sim::run(&sim, &cell.workloads, &mut policy)?;
            let csv = result.cax.dump_csv();
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)?;
                    println!("wrote context tree to {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Presets { what: PresetsCommand::List } => {
            println!("channel presets:");
            for name in channel_presets::NAMES {
                let cfg = channel_presets::by_name(name).expect("known preset");
                let target = cfg.optimal_read_ratio();
                let balanced = effective_bandwidth(&cfg, 0.5).unwrap_or(0.0);
                let pure_read = effective_bandwidth(&cfg, 1.0).unwrap_or(0.0);
                let pure_write = effective_bandwidth(&cfg, 0.0).unwrap_or(0.0);
                println!(
                    "  {name:20} {:?}  pure-read {pure_read:6.1}  pure-write {pure_write:6.1}  balanced {balanced:6.1} GB/s  target r={target:.2}",
                    cfg.mode
                );
            }
            println!("workload presets:");
            for name in workload_presets::NAMES {
                let spec = workload_presets::by_name(name).expect("known preset");
                println!(
                    "  {name:20} read_ratio {:.3}  pattern {:?}",
                    spec.read_ratio, spec.pattern
                );
            }
            println!("policies:");
            for name in POLICY_NAMES {
                println!("  {name}");
            }
            println!("builtin experiments:");
            for name in builtin::NAMES {
                println!("  {name}");
            }
            Ok(())
        }
    }
}
