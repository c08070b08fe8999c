//! `irs-bench`: train, evaluate, optimize, compare and time the schemes.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 when training
//! diverges, 1 otherwise. `IRS_THREADS` sets the worker count used to run
//! seeds and schemes in parallel.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use irs_core::agent::{load_agent, save_agent};
use irs_core::bench::*;
use irs_core::{Error, Result};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "irs-bench", version, about = "Multi-IRS secure spectrum-sharing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train learner schemes and save their agents.
    Train(Common),
    /// Greedy evaluation of saved agents.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Agent file; defaults to the ones `train` wrote under `--out`.
        #[arg(long)]
        agent: Option<PathBuf>,
    },
    /// Per-step alternating optimization.
    Ao(Common),
    /// Run every scheme and seed and rank them.
    Compare(Common),
    /// Decision latency of the policy against AO.
    Time {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        agent: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme list.
    #[arg(long)]
    scheme: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(s) = &self.scheme {
            cfg.schemes = SchemeId::parse_list(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn agent_path(dir: &Path, scheme: SchemeId, seed: u64) -> PathBuf {
    dir.join("agents").join(format!("{}.bin", metrics::run_id(scheme, seed)))
}

fn rows_of(runs: &[SchemeRun]) -> impl Iterator<Item = &MetricsRow> {
    runs.iter().flat_map(|r| r.rows.iter())
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn train_cmd(cfg: RunConfig) -> Result<()> {
    if let Some(bad) = cfg.schemes.iter().find(|s| s.variant().is_none()) {
        return Err(Error::Config(format!("`{bad}` is not a learner; use the `ao` subcommand")));
    }
    cfg.echo(&cfg.out_dir)?;
    let runs = run_all(&cfg)?;
    fs::create_dir_all(cfg.out_dir.join("agents"))?;
    for r in &runs {
        if let Some(agent) = &r.agent {
            save_agent(agent_path(&cfg.out_dir, r.scheme, r.seed), agent)?;
        }
        println!(
            "{:<24} final-window secrecy {:.4}  eval secrecy {:.4}",
            metrics::run_id(r.scheme, r.seed),
            r.final_window_secrecy(cfg.final_window),
            r.eval_secrecy()
        );
    }
    emit_csv(rows_of(&runs), cfg.out_dir.join("metrics.csv"))
}

fn eval_cmd(cfg: RunConfig, agent: Option<PathBuf>) -> Result<()> {
    let scenario = Arc::new(cfg.load_scenario()?);
    cfg.echo(&cfg.out_dir)?;
    let jobs: Vec<(SchemeId, u64, PathBuf)> = match agent {
        Some(p) => {
            let scheme = cfg.schemes[0];
            cfg.seeds.iter().map(|&s| (scheme, s, p.clone())).collect()
        }
        None => {
            let dir = &cfg.out_dir;
            cfg.schemes
                .iter()
                .filter(|s| s.variant().is_some())
                .flat_map(|&sc| cfg.seeds.iter().map(move |&s| (sc, s, agent_path(dir, sc, s))))
                .collect()
        }
    };
    if jobs.is_empty() {
        return Err(Error::Config("no learner scheme to evaluate".into()));
    }
    let rows: Vec<Vec<MetricsRow>> = jobs
        .par_iter()
        .map(|(scheme, seed, path)| {
            let agent = load_agent(path, scenario.clone()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            eval_rows(&agent, *scheme, *seed, cfg.eval_episodes, cfg.steps, cfg.record_timing)
        })
        .collect::<Result<_>>()?;
    for r in &rows {
        if let Some(first) = r.first() {
            let m = r.iter().map(|x| x.record.secrecy).sum::<f64>() / r.len() as f64;
            println!("{:<24} eval secrecy {m:.4}", first.run_id);
        }
    }
    emit_csv(rows.iter().flatten(), cfg.out_dir.join("eval.csv"))
}

fn ao_cmd(mut cfg: RunConfig) -> Result<()> {
    cfg.schemes = vec![SchemeId::Ao];
    cfg.echo(&cfg.out_dir)?;
    let runs = run_all(&cfg)?;
    for r in &runs {
        println!(
            "{:<24} final-window secrecy {:.4}",
            metrics::run_id(r.scheme, r.seed),
            r.final_window_secrecy(cfg.final_window)
        );
    }
    emit_csv(rows_of(&runs), cfg.out_dir.join("metrics.csv"))
}

fn compare_cmd(cfg: RunConfig) -> Result<()> {
    cfg.echo(&cfg.out_dir)?;
    let (cmp, runs) = compare_schemes(&cfg)?;
    emit_csv(rows_of(&runs), cfg.out_dir.join("metrics.csv"))?;
    write(cfg.out_dir.join("summary.csv"), &cmp.to_csv()?)?;
    print!("{}", cmp.table());
    Ok(())
}

fn time_cmd(cfg: RunConfig, agent: Option<PathBuf>) -> Result<()> {
    let scenario = Arc::new(cfg.load_scenario()?);
    cfg.echo(&cfg.out_dir)?;
    let agent = agent
        .map(|p| load_agent(&p, scenario.clone()).map_err(|e| Error::Config(format!("{}: {e}", p.display()))))
        .transpose()?;
    let report = time_decisions(&cfg, scenario, agent.as_ref(), cfg.seeds[0])?;
    write(cfg.out_dir.join("timing.csv"), &report.to_csv()?)?;
    write(cfg.out_dir.join("timing.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    println!(
        "machine {} ({}, {} threads)",
        report.machine.fingerprint, report.machine.cpu_model, report.machine.threads
    );
    println!("{:<10} {:>6} {:>12} {:>12}", "scheme", "cap", "median_ms", "p95_ms");
    for r in &report.rows {
        println!(
            "{:<10} {:>6} {:>12.3} {:>12.3}",
            r.scheme, r.ao_cap, r.stats.median_ms, r.stats.p95_ms
        );
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("IRS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("IRS_THREADS must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(Error::Config("IRS_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train(c) => train_cmd(c.resolve()?),
        Command::Eval { common, agent } => eval_cmd(common.resolve()?, agent),
        Command::Ao(c) => ao_cmd(c.resolve()?),
        Command::Compare(c) => compare_cmd(c.resolve()?),
        Command::Time { common, agent } => time_cmd(common.resolve()?, agent),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Divergence(_) => 3,
                _ => 1,
            })
        }
    }
}
