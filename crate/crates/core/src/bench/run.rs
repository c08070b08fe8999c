//! Single runs and multi-seed comparisons.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::metrics::{run_id, MetricsRow, Phase};
use super::scheme::SchemeId;
use crate::agent::{evaluate_policy, mean, train, Agent, StepRecord};
use crate::ao::ao_solve;
use crate::env::{AccessMode, Environment, Scenario};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Output of one (scheme, seed) run.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: SchemeId,
    pub seed: u64,
    /// Training (or per-step solve) rows followed by evaluation rows.
    pub rows: Vec<MetricsRow>,
    /// `None` for AO.
    pub agent: Option<Agent>,
}

impl SchemeRun {
    fn phase_rows(&self, phase: Phase) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(move |r| r.phase == phase)
    }

    /// Mean secrecy rate over the last `window` episodes of the training
    /// (or solve) phase.
    pub fn final_window_secrecy(&self, window: usize) -> f64 {
        let main = if self.scheme == SchemeId::Ao { Phase::Solve } else { Phase::Train };
        let last = self.phase_rows(main).map(|r| r.record.episode).max().unwrap_or(0);
        let from = (last + 1).saturating_sub(window);
        mean(self.phase_rows(main).filter(|r| r.record.episode >= from).map(|r| r.record.secrecy))
    }

    /// Mean secrecy rate of the greedy evaluation phase.
    pub fn eval_secrecy(&self) -> f64 {
        mean(self.phase_rows(Phase::Eval).map(|r| r.record.secrecy))
    }
}

fn rows(scheme: SchemeId, seed: u64, phase: Phase, records: Vec<StepRecord>) -> Vec<MetricsRow> {
    let id = run_id(scheme, seed);
    records
        .into_iter()
        .map(|record| MetricsRow {
            run_id: id.clone(),
            scheme,
            seed,
            phase,
            record,
            decision_ms: None,
        })
        .collect()
}

/// Greedy rollouts of `agent`, optionally timing each decision.
pub fn eval_rows(agent: &Agent, scheme: SchemeId, seed: u64, episodes: usize, steps: usize, timed: bool) -> Result<Vec<MetricsRow>> {
    if !timed {
        return Ok(rows(scheme, seed, Phase::Eval, evaluate_policy(agent, episodes, steps, seed)?));
    }
    let mut env_rng = SeededRng::stream(seed, 11);
    let mut act_rng = SeededRng::stream(seed, 12);
    let mut out = Vec::with_capacity(episodes * steps);
    if episodes == 0 {
        return Ok(out);
    }
    let (mut env, mut state) = Environment::new(agent.scenario().clone(), agent.variant.mode, &mut env_rng)?;
    for ep in 0..episodes {
        if ep > 0 {
            state = env.reset(&mut env_rng)?;
        }
        for t in 0..steps {
            let start = Instant::now();
            let (o, action) = agent.act(&state, &mut act_rng)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let step = env.step(&action)?;
            let mut row = rows(
                scheme,
                seed,
                Phase::Eval,
                vec![StepRecord::new(ep, t, o, step.reward, &action, &step.evaluation)],
            );
            row[0].decision_ms = Some(ms);
            out.append(&mut row);
            state = step.state;
        }
    }
    Ok(out)
}

/// Per-step AO on the same channel sequence a learner with this seed
/// would see during training.
fn solve_rows(scenario: Arc<Scenario>, cfg: &RunConfig, seed: u64) -> Result<Vec<MetricsRow>> {
    let mode = AccessMode::SensingEnhanced;
    let mut env_rng = SeededRng::stream(seed, 1);
    let mut out = Vec::with_capacity(cfg.episodes * cfg.steps);
    if cfg.episodes == 0 {
        return Ok(out);
    }
    let (mut env, _) = Environment::new(scenario.clone(), mode, &mut env_rng)?;
    for ep in 0..cfg.episodes {
        if ep > 0 {
            env.reset(&mut env_rng)?;
        }
        for t in 0..cfg.steps {
            let start = Instant::now();
            let sol = ao_solve(&scenario, env.channels(), mode, &cfg.ao)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let step = env.step(&sol.action)?;
            let mut row = rows(
                SchemeId::Ao,
                seed,
                Phase::Solve,
                vec![StepRecord::new(ep, t, 0, step.reward, &sol.action, &step.evaluation)],
            );
            row[0].decision_ms = cfg.record_timing.then_some(ms);
            out.append(&mut row);
        }
    }
    Ok(out)
}

/// Runs one scheme for one seed: training plus greedy evaluation for the
/// learners, per-step optimization for AO.
pub fn run_scheme(scheme: SchemeId, scenario: Arc<Scenario>, seed: u64, cfg: &RunConfig) -> Result<SchemeRun> {
    scenario.validate()?;
    let Some(variant) = scheme.variant() else {
        return Ok(SchemeRun {
            scheme,
            seed,
            rows: solve_rows(scenario, cfg, seed)?,
            agent: None,
        });
    };
    let tc = cfg.train_config();
    let (agent, records) = train(scenario, &tc, variant, seed)?;
    let mut all = rows(scheme, seed, Phase::Train, records);
    all.extend(eval_rows(&agent, scheme, seed, cfg.eval_episodes, cfg.steps, cfg.record_timing)?);
    Ok(SchemeRun {
        scheme,
        seed,
        rows: all,
        agent: Some(agent),
    })
}

/// Every (scheme, seed) pair of `cfg`, in parallel, returned in scheme-major
/// config order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<SchemeRun>> {
    cfg.validate()?;
    let scenario = Arc::new(cfg.load_scenario()?);
    let jobs: Vec<(SchemeId, u64)> = cfg
        .schemes
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    jobs.par_iter()
        .map(|&(scheme, seed)| run_scheme(scheme, scenario.clone(), seed, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: SchemeId,
    /// Final-window secrecy of each seed, in config order.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across seeds (0 for one seed).
    pub std: f64,
    /// Mean greedy-evaluation secrecy (NaN for AO).
    pub eval_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub schemes: Vec<SchemeSummary>,
    /// Schemes by decreasing mean; ties keep config order.
    pub ranking: Vec<SchemeId>,
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Groups finished runs by scheme and ranks them.
pub fn summarize(runs: &[SchemeRun], final_window: usize) -> Comparison {
    let mut order: Vec<SchemeId> = Vec::new();
    for r in runs {
        if !order.contains(&r.scheme) {
            order.push(r.scheme);
        }
    }
    let schemes: Vec<SchemeSummary> = order
        .iter()
        .map(|&scheme| {
            let mine: Vec<&SchemeRun> = runs.iter().filter(|r| r.scheme == scheme).collect();
            let per_seed: Vec<f64> = mine.iter().map(|r| r.final_window_secrecy(final_window)).collect();
            let eval_mean = if scheme == SchemeId::Ao {
                f64::NAN
            } else {
                mean(mine.iter().map(|r| r.eval_secrecy()))
            };
            SchemeSummary {
                scheme,
                mean: mean(per_seed.iter().copied()),
                std: sample_std(&per_seed),
                per_seed,
                eval_mean,
            }
        })
        .collect();
    let mut idx: Vec<usize> = (0..schemes.len()).collect();
    idx.sort_by(|&a, &b| schemes[b].mean.total_cmp(&schemes[a].mean).then(a.cmp(&b)));
    Comparison {
        ranking: idx.iter().map(|&i| schemes[i].scheme).collect(),
        schemes,
    }
}

/// Runs every configured scheme and seed and summarizes them.
pub fn compare_schemes(cfg: &RunConfig) -> Result<(Comparison, Vec<SchemeRun>)> {
    let runs = run_all(cfg)?;
    Ok((summarize(&runs, cfg.final_window), runs))
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scheme", "seeds", "mean_secrecy", "std_secrecy", "eval_secrecy", "rank"])?;
        for s in &self.schemes {
            let rank = self.ranking.iter().position(|&id| id == s.scheme).unwrap_or(0) + 1;
            w.write_record([
                s.scheme.to_string(),
                s.per_seed.len().to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                if s.eval_mean.is_nan() {
                    String::new()
                } else {
                    s.eval_mean.to_string()
                },
                rank.to_string(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Format(e.to_string()))
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!("{:<4} {:<14} {:>12} {:>10} {:>12}\n", "rank", "scheme", "secrecy", "std", "eval");
        for (i, id) in self.ranking.iter().enumerate() {
            let s = self.schemes.iter().find(|s| s.scheme == *id).expect("ranked scheme is summarized");
            let eval = if s.eval_mean.is_nan() {
                "-".to_string()
            } else {
                format!("{:.4}", s.eval_mean)
            };
            out.push_str(&format!("{:<4} {:<14} {:>12.4} {:>10.4} {:>12}\n", i + 1, id, s.mean, s.std, eval));
        }
        out
    }
}
