//! Decision latency of the trained policy against per-step AO.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::scheme::SchemeId;
use crate::agent::Agent;
use crate::ao::{ao_solve, AoConfig};
use crate::env::{AccessMode, ChannelSet, Environment, Scenario};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Where the numbers were measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub cpu_model: String,
    pub logical_cpus: usize,
    pub threads: usize,
    /// Short hash of the fields above.
    pub fingerprint: String,
}

impl MachineInfo {
    pub fn current() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|t| {
                t.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|m| m.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        let logical_cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = rayon::current_num_threads();
        let os = std::env::consts::OS.to_string();
        let arch = std::env::consts::ARCH.to_string();
        let digest = Sha256::digest(format!("{os}|{arch}|{cpu_model}|{logical_cpus}|{threads}"));
        let fingerprint = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Self {
            os,
            arch,
            cpu_model,
            logical_cpus,
            threads,
            fingerprint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles of `ms`.
    pub fn from_samples(ms: &[f64]) -> Self {
        let mut v = ms.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| {
            if v.is_empty() {
                return f64::NAN;
            }
            let i = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
            v[i - 1]
        };
        Self {
            samples: v.len(),
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
            mean_ms: if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scheme: SchemeId,
    /// The AO iteration cap of this setting.
    pub ao_cap: usize,
    pub stats: LatencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub machine: MachineInfo,
    pub scenario: String,
    pub rows: Vec<TimingRow>,
}

impl TimingReport {
    pub fn get(&self, scheme: SchemeId, cap: usize) -> Option<&LatencyStats> {
        self.rows.iter().find(|r| r.scheme == scheme && r.ao_cap == cap).map(|r| &r.stats)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scheme",
            "ao_cap",
            "samples",
            "median_ms",
            "p95_ms",
            "mean_ms",
            "scenario",
            "machine",
            "cpu_model",
            "threads",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.scheme.to_string(),
                r.ao_cap.to_string(),
                r.stats.samples.to_string(),
                r.stats.median_ms.to_string(),
                r.stats.p95_ms.to_string(),
                r.stats.mean_ms.to_string(),
                self.scenario.clone(),
                self.machine.fingerprint.clone(),
                self.machine.cpu_model.clone(),
                self.machine.threads.to_string(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Format(e.to_string()))
    }
}

/// States and channels of `n` consecutive frames, drawn before any clock
/// starts so that channel generation is not timed.
fn frames(agent: &Agent, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, ChannelSet)>> {
    let mut env_rng = SeededRng::stream(seed, 21);
    let mut act_rng = SeededRng::stream(seed, 22);
    let (mut env, mut state) = Environment::new(agent.scenario().clone(), AccessMode::SensingEnhanced, &mut env_rng)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push((state.clone(), env.channels().clone()));
        let (_, a) = agent.act(&state, &mut act_rng)?;
        state = env.step(&a)?.state;
    }
    Ok(out)
}

/// Times greedy policy decisions and AO solves on the same frames, once
/// per AO iteration cap. AO runs exactly `cap` outer iterations. Without
/// `agent` a freshly initialized one of the configured architecture is
/// timed; inference cost does not depend on the weights.
pub fn time_decisions(cfg: &RunConfig, scenario: Arc<Scenario>, agent: Option<&Agent>, seed: u64) -> Result<TimingReport> {
    cfg.validate()?;
    let fresh;
    let agent = match agent {
        Some(a) => a,
        None => {
            fresh = Agent::new(
                scenario.clone(),
                cfg.train_config(),
                Default::default(),
                &mut SeededRng::stream(seed, 0),
            )?;
            &fresh
        }
    };
    let frames = frames(agent, cfg.timing.decisions, seed)?;
    let mut act_rng = SeededRng::stream(seed, 23);
    let mut rows = Vec::new();
    for &cap in &cfg.timing.ao_caps {
        let ao_cfg = AoConfig {
            max_iters: cap,
            fixed_iterations: true,
            ..cfg.ao.clone()
        };
        let mut policy_ms = Vec::with_capacity(frames.len());
        let mut ao_ms = Vec::with_capacity(frames.len());
        for (state, ch) in &frames {
            let t = Instant::now();
            std::hint::black_box(agent.act(state, &mut act_rng)?);
            policy_ms.push(t.elapsed().as_secs_f64() * 1e3);
            let t = Instant::now();
            std::hint::black_box(ao_solve(&scenario, ch, AccessMode::SensingEnhanced, &ao_cfg)?);
            ao_ms.push(t.elapsed().as_secs_f64() * 1e3);
        }
        rows.push(TimingRow {
            scheme: SchemeId::Proposed,
            ao_cap: cap,
            stats: LatencyStats::from_samples(&policy_ms),
        });
        rows.push(TimingRow {
            scheme: SchemeId::Ao,
            ao_cap: cap,
            stats: LatencyStats::from_samples(&ao_ms),
        });
    }
    Ok(TimingReport {
        machine: MachineInfo::current(),
        scenario: scenario.name.clone(),
        rows,
    })
}
