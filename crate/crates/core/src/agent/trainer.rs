//! The hierarchical agent and its training loop.
//!
//! Each step the D3QN picks an option (subchannel assignment plus IRS
//! pairing), the SAC policy picks the continuous part conditioned on that
//! option, and both learn from the same reward. Options last one step.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::codec::{action_dim, decode_action, ReflectionOverride};
use super::d3qn::{epsilon_at, D3qn};
use super::options::OptionCatalog;
use super::replay::{Experience, ReplayBuffer};
use super::sac::{Sac, SacBatch, SacRates};
use crate::env::{state_len, AccessMode, ActionComposite, Environment, Evaluation, Scenario};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient rounds per environment step.
    pub gradient_rounds: usize,
    /// Stored transitions required before learning starts.
    pub warmup: usize,
    pub d3qn_hidden: Vec<usize>,
    pub sac_hidden: Vec<usize>,
    pub lr_d3qn: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub init_alpha: f64,
    pub tau_soft: f64,
    /// Steps between hard copies of the D3QN target.
    pub target_sync: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Steps over which epsilon decays.
    pub eps_horizon: u64,
    /// Overrides the scenario's discount factor.
    pub discount: Option<f64>,
    /// Greedy evaluation episodes run after training.
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            steps_per_episode: 10,
            batch_size: 64,
            buffer_capacity: 20_000,
            gradient_rounds: 1,
            warmup: 64,
            d3qn_hidden: vec![128, 128, 128],
            sac_hidden: vec![256, 256],
            lr_d3qn: 0.005,
            lr_actor: 0.004,
            lr_critic: 0.004,
            lr_alpha: 0.004,
            init_alpha: 0.1,
            tau_soft: 0.005,
            target_sync: 200,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_horizon: 10_000,
            discount: None,
            eval_episodes: 20,
        }
    }
}

impl TrainConfig {
    /// Small networks and a schedule sized for a few thousand steps.
    pub fn desk() -> Self {
        Self {
            episodes: 300,
            steps_per_episode: 10,
            batch_size: 32,
            warmup: 32,
            d3qn_hidden: vec![64, 64],
            sac_hidden: vec![64, 64],
            lr_d3qn: 1e-3,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            lr_alpha: 1e-3,
            init_alpha: 0.01,
            tau_soft: 0.01,
            target_sync: 100,
            eps_horizon: 1_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.steps_per_episode == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("steps_per_episode, batch_size and buffer_capacity must be positive");
        }
        if self.d3qn_hidden.contains(&0) || self.sac_hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        for (name, v) in [
            ("lr_d3qn", self.lr_d3qn),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_alpha", self.lr_alpha),
            ("init_alpha", self.init_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.tau_soft) || !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("tau_soft and epsilon bounds must lie in [0, 1]");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be positive");
        }
        if let Some(g) = self.discount {
            if !(0.0..1.0).contains(&g) {
                return bad("discount must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OptionSource {
    #[default]
    Learned,
    /// Uniformly random option every step.
    Uniform,
}

/// The component a benchmark scheme freezes or randomizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Variant {
    pub options: OptionSource,
    pub reflection: ReflectionOverride,
    pub mode: AccessMode,
}

/// Per-step summary kept by training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub option: usize,
    pub reward: f64,
    pub secrecy: f64,
    pub su_rates: Vec<f64>,
    pub pu_rates: Vec<f64>,
    pub max_eve_rates: Vec<f64>,
    /// Smallest `R_d - R_d^min`.
    pub c1_slack: f64,
    pub c2_slack: f64,
    pub c3_slack: f64,
    pub tau: f64,
}

impl StepRecord {
    pub fn new(episode: usize, step: usize, option: usize, reward: f64, action: &ActionComposite, ev: &Evaluation) -> Self {
        Self {
            episode,
            step,
            option,
            reward,
            secrecy: ev.secrecy,
            su_rates: ev.su_rates.clone(),
            pu_rates: ev.pu_rates.clone(),
            max_eve_rates: ev.max_eve_rates.clone(),
            c1_slack: ev.constraints.pu_rate.iter().copied().fold(f64::INFINITY, f64::min),
            c2_slack: ev.constraints.false_alarm,
            c3_slack: ev.constraints.power,
            tau: action.tau,
        }
    }
}

/// Trained (or freshly initialized) hierarchical agent.
#[derive(Debug, Clone)]
pub struct Agent {
    pub catalog: OptionCatalog,
    pub d3qn: D3qn,
    pub sac: Sac,
    pub variant: Variant,
    pub config: TrainConfig,
    pub fingerprint: String,
    scenario: Arc<Scenario>,
}

impl Agent {
    pub fn new(scenario: Arc<Scenario>, config: TrainConfig, variant: Variant, rng: &mut SeededRng) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        let catalog = OptionCatalog::build(&scenario)?;
        let sdim = state_len(&scenario);
        let d3qn = D3qn::new(sdim, catalog.len(), &config.d3qn_hidden, config.lr_d3qn, rng)?;
        let sac = Sac::new(
            sdim + catalog.len(),
            action_dim(&scenario),
            &config.sac_hidden,
            rates(&config),
            config.init_alpha,
            rng,
        )?;
        Ok(Self {
            catalog,
            d3qn,
            sac,
            variant,
            fingerprint: scenario.fingerprint(),
            config,
            scenario,
        })
    }

    pub(crate) fn from_parts(scenario: Arc<Scenario>, config: TrainConfig, variant: Variant, d3qn: D3qn, sac: Sac) -> Result<Self> {
        let catalog = OptionCatalog::build(&scenario)?;
        Ok(Self {
            catalog,
            d3qn,
            sac,
            variant,
            fingerprint: scenario.fingerprint(),
            config,
            scenario,
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    fn obs(&self, state: &[f64], option: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(state.len() + self.catalog.len());
        v.extend_from_slice(state);
        v.extend(self.catalog.one_hot(option));
        v
    }

    fn pick_option(&self, state: &[f64], eps: f64, rng: &mut SeededRng) -> Result<usize> {
        match self.variant.options {
            OptionSource::Learned => self.d3qn.select(state, eps, rng),
            OptionSource::Uniform => Ok(rng.below(self.catalog.len())),
        }
    }

    /// Exploratory decision: epsilon-greedy option and a sampled continuous
    /// action. Returns the option, the squashed vector and the decoded action.
    pub fn explore(&self, state: &[f64], eps: f64, rng: &mut SeededRng) -> Result<(usize, Vec<f64>, ActionComposite)> {
        let o = self.pick_option(state, eps, rng)?;
        let x = self.sac.sample(&self.obs(state, o), rng)?.action;
        let a = decode_action(&self.scenario, self.catalog.entry(o), &x, self.variant.reflection)?;
        Ok((o, x, a))
    }

    /// Greedy decision. `rng` is only used by the uniform option source.
    pub fn act(&self, state: &[f64], rng: &mut SeededRng) -> Result<(usize, ActionComposite)> {
        let o = self.pick_option(state, 0.0, rng)?;
        let x = self.sac.deterministic(&self.obs(state, o))?;
        let a = decode_action(&self.scenario, self.catalog.entry(o), &x, self.variant.reflection)?;
        Ok((o, a))
    }

    fn discount(&self) -> f64 {
        self.config.discount.unwrap_or(self.scenario.reward.discount)
    }

    fn learn(&mut self, buffer: &ReplayBuffer, rng: &mut SeededRng) -> Result<()> {
        let batch = buffer.sample(self.config.batch_size, rng);
        let n = batch.len();
        let sdim = batch[0].state.len();
        let states = Array2::from_shape_fn((n, sdim), |(i, j)| batch[i].state[j]);
        let next = Array2::from_shape_fn((n, sdim), |(i, j)| batch[i].next_state[j]);
        let options: Vec<usize> = batch.iter().map(|e| e.option).collect();
        let rewards: Vec<f64> = batch.iter().map(|e| e.reward).collect();
        let gamma = self.discount();
        let next_options: Vec<usize> = match self.variant.options {
            OptionSource::Learned => {
                let loss = self.d3qn.train_batch(states.view(), &options, &rewards, next.view(), gamma)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence(format!("D3QN loss became {loss}")));
                }
                batch.iter().map(|e| self.d3qn.greedy(&e.next_state)).collect::<Result<_>>()?
            }
            OptionSource::Uniform => (0..n).map(|_| rng.below(self.catalog.len())).collect(),
        };
        let obs = Array2::from_shape_fn((n, sdim + self.catalog.len()), |(i, j)| {
            if j < sdim {
                states[[i, j]]
            } else if j - sdim == options[i] {
                1.0
            } else {
                0.0
            }
        });
        let next_obs = Array2::from_shape_fn((n, sdim + self.catalog.len()), |(i, j)| {
            if j < sdim {
                next[[i, j]]
            } else if j - sdim == next_options[i] {
                1.0
            } else {
                0.0
            }
        });
        let dim = self.sac.action_dim();
        let actions = Array2::from_shape_fn((n, dim), |(i, j)| batch[i].action[j]);
        let sb = SacBatch {
            obs,
            actions,
            rewards,
            next_obs,
        };
        let l = self.sac.update(&sb, gamma, self.config.tau_soft, rng)?;
        if ![l.critic1, l.critic2, l.policy, l.alpha].iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence(format!("SAC losses became {l:?}")));
        }
        if !(self.sac.policy.all_finite() && self.sac.q1.all_finite() && self.sac.q2.all_finite() && self.d3qn.online.all_finite()) {
            return Err(Error::Divergence("network parameters became non-finite".into()));
        }
        Ok(())
    }
}

fn rates(c: &TrainConfig) -> SacRates {
    SacRates {
        actor: c.lr_actor,
        critic: c.lr_critic,
        alpha: c.lr_alpha,
    }
}

/// Runs the training loop and returns the agent and one record per step.
pub fn train(scenario: Arc<Scenario>, config: &TrainConfig, variant: Variant, seed: u64) -> Result<(Agent, Vec<StepRecord>)> {
    let mut init_rng = SeededRng::stream(seed, 0);
    let mut env_rng = SeededRng::stream(seed, 1);
    let mut act_rng = SeededRng::stream(seed, 2);
    let mut learn_rng = SeededRng::stream(seed, 3);
    let mut agent = Agent::new(scenario.clone(), config.clone(), variant, &mut init_rng)?;
    let mut records = Vec::with_capacity(config.episodes * config.steps_per_episode);
    if config.episodes == 0 {
        return Ok((agent, records));
    }
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let (mut env, mut state) = Environment::new(scenario, variant.mode, &mut env_rng)?;
    let mut global: u64 = 0;
    for ep in 0..config.episodes {
        if ep > 0 {
            state = env.reset(&mut env_rng)?;
        }
        for t in 0..config.steps_per_episode {
            let eps = epsilon_at(global, config.eps_start, config.eps_end, config.eps_horizon);
            let (o, x, action) = agent.explore(&state, eps, &mut act_rng)?;
            let out = env.step(&action)?;
            if !out.reward.is_finite() {
                return Err(Error::Divergence(format!("reward became {}", out.reward)));
            }
            records.push(StepRecord::new(ep, t, o, out.reward, &action, &out.evaluation));
            buffer.push(Experience {
                state: std::mem::take(&mut state),
                option: o,
                action: x,
                reward: out.reward,
                next_state: out.state.clone(),
            });
            state = out.state;
            if buffer.len() >= config.warmup.max(1) {
                for _ in 0..config.gradient_rounds {
                    agent.learn(&buffer, &mut learn_rng)?;
                }
            }
            global += 1;
            if global.is_multiple_of(config.target_sync) {
                agent.d3qn.sync_target();
            }
        }
    }
    Ok((agent, records))
}

/// Greedy rollouts of a trained agent on fresh episodes.
pub fn evaluate_policy(agent: &Agent, episodes: usize, steps: usize, seed: u64) -> Result<Vec<StepRecord>> {
    let mut env_rng = SeededRng::stream(seed, 11);
    let mut act_rng = SeededRng::stream(seed, 12);
    let mut records = Vec::with_capacity(episodes * steps);
    if episodes == 0 {
        return Ok(records);
    }
    let (mut env, mut state) = Environment::new(agent.scenario.clone(), agent.variant.mode, &mut env_rng)?;
    for ep in 0..episodes {
        if ep > 0 {
            state = env.reset(&mut env_rng)?;
        }
        for t in 0..steps {
            let (o, action) = agent.act(&state, &mut act_rng)?;
            let out = env.step(&action)?;
            records.push(StepRecord::new(ep, t, o, out.reward, &action, &out.evaluation));
            state = out.state;
        }
    }
    Ok(records)
}

/// Mean reward of each episode, in order.
pub fn episode_rewards(records: &[StepRecord]) -> Vec<f64> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for r in records {
        if out.len() <= r.episode {
            out.resize(r.episode + 1, (0.0, 0));
        }
        out[r.episode].0 += r.reward;
        out[r.episode].1 += 1;
    }
    out.into_iter().map(|(s, n)| if n == 0 { 0.0 } else { s / n as f64 }).collect()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> TrainConfig {
        TrainConfig {
            episodes: 3,
            steps_per_episode: 4,
            batch_size: 4,
            warmup: 4,
            d3qn_hidden: vec![8],
            sac_hidden: vec![8],
            target_sync: 5,
            ..TrainConfig::desk()
        }
    }

    #[test]
    fn zero_episodes() {
        let (_, rec) = train(
            Arc::new(Scenario::tiny()),
            &TrainConfig { episodes: 0, ..quick() },
            Variant::default(),
            1,
        )
        .unwrap();
        assert!(rec.is_empty());
    }

    #[test]
    fn deterministic_records() {
        let s = Arc::new(Scenario::tiny());
        let (a, ra) = train(s.clone(), &quick(), Variant::default(), 7).unwrap();
        let (b, rb) = train(s, &quick(), Variant::default(), 7).unwrap();
        assert_eq!(ra.len(), 12);
        assert_eq!(ra, rb);
        assert_eq!(a.sac.policy, b.sac.policy);
        let ea = evaluate_policy(&a, 2, 3, 1).unwrap();
        assert_eq!(ea, evaluate_policy(&b, 2, 3, 1).unwrap());
        assert!(ea.iter().all(|r| r.c3_slack >= 0.0));
    }

    #[test]
    fn episode_means() {
        let s = Arc::new(Scenario::tiny());
        let (_, r) = train(s, &quick(), Variant::default(), 2).unwrap();
        let m = episode_rewards(&r);
        assert_eq!(m.len(), 3);
        assert!((m[0] - mean(r[..4].iter().map(|x| x.reward))).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { lr_actor: 0.0, ..quick() }.validate().is_err());
        assert!(TrainConfig {
            discount: Some(1.0),
            ..quick()
        }
        .validate()
        .is_err());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"episodes": 2, "bogus": 1}"#).is_err());
        assert_eq!(serde_json::from_str::<TrainConfig>("{}").unwrap(), TrainConfig::default());
    }
}
