//! The decision process seen by the learning agent.
//!
//! Frame `t` of an episode uses channels drawn from sub-stream `t` of the
//! episode seed, so a step is a pure function of (episode seed, step index,
//! action). The state handed to the agent before frame `t` contains the
//! channels of frame `t` (seen through the previous action's pairing and
//! reflection), the previous action, and the rates that action achieved.
//!
//! State layout, in order:
//!
//! | block | length |
//! |---|---|
//! | SU composite channels, re/im, `asinh(h * sqrt(TP_s / sigma_k^2))` | `2 N_s K` |
//! | Eve composite channels through each SU's IRS, same scaling with `sigma_m^2` | `2 N_s M K` |
//! | previous `xi`, row-major | `K C` |
//! | previous `zeta`, row-major | `K Z` |
//! | previous amplitudes as `2b - 1` | `Z N_n` |
//! | previous phases as `phi / pi - 1` | `Z N_n` |
//! | previous beams, re/im, over `sqrt(TP_s)` | `2 N_s K` |
//! | previous `tau / T` | `1` |
//! | `R_k` | `K` |
//! | `R_d` | `D` |
//! | `max_k R_{m,k}` per Eve | `M` |
//! | secrecy rate | `1` |

use std::sync::Arc;

use ndarray::Array1;

use super::action::{ActionComposite, Assignment, ReflectionConfig};
use super::channels::{draw_channels, ChannelSet};
use super::rates::{evaluate, AccessMode, Evaluation, LinkView};
use super::scenario::Scenario;
use crate::error::Result;
use crate::numerics::{CVec, SeededRng, C64};

/// Length of the state vector for `s`.
pub fn state_len(s: &Scenario) -> usize {
    let (k, m, c, z, d) = (s.num_su(), s.num_eve(), s.subchannels, s.num_irs(), s.num_pu());
    let (ns, nn) = (s.sbs_antennas, s.irs_elements);
    2 * ns * k + 2 * ns * m * k + k * c + k * z + 2 * z * nn + 2 * ns * k + 1 + k + d + m + 1
}

/// The reward: unclamped sum secrecy plus shortfall penalties.
pub fn reward(s: &Scenario, ev: &Evaluation) -> f64 {
    let raw: f64 = ev.su_rates.iter().zip(&ev.max_eve_rates).map(|(r, e)| r - e).sum();
    let su_pen: f64 = ev.secrecy_per_su.iter().map(|x| (x - s.su_min_secrecy).min(0.0)).sum();
    let pu_pen: f64 = ev.pu_rates.iter().map(|r| (r - s.pu_min_rate).min(0.0)).sum();
    raw + s.reward.nu_s * su_pen + s.reward.nu_d * pu_pen
}

/// Random feasible assignment, identity reflection, equal-power beams and
/// `tau = T / 10`.
pub fn initial_action(s: &Scenario, rng: &mut SeededRng) -> ActionComposite {
    let channels = rng.sample_indices(s.subchannels, s.num_su());
    let irs: Vec<usize> = (0..s.num_su()).map(|_| rng.below(s.num_irs())).collect();
    let assignment = Assignment::from_maps(&channels, &irs, s.subchannels, s.num_irs()).expect("indices drawn in range");
    ActionComposite {
        assignment,
        theta: ReflectionConfig::identity(s.num_irs(), s.irs_elements),
        beams: uniform_beams(s),
        tau: s.frame_duration_s / 10.0,
    }
}

pub fn uniform_beams(s: &Scenario) -> Vec<CVec> {
    let amp = (s.sbs_power_budget() * (1.0 - 1e-12) / (s.num_su() * s.sbs_antennas) as f64).sqrt();
    vec![Array1::from_elem(s.sbs_antennas, C64::new(amp, 0.0)); s.num_su()]
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Arc<Scenario>,
    mode: AccessMode,
    episode_seed: u64,
    step: u64,
    channels: ChannelSet,
    prev_action: ActionComposite,
    prev_eval: Evaluation,
}

impl Environment {
    /// Builds an environment and resets it from `rng`.
    pub fn new(scenario: Arc<Scenario>, mode: AccessMode, rng: &mut SeededRng) -> Result<(Self, Vec<f64>)> {
        scenario.validate()?;
        let episode_seed = rng.next_seed();
        let a0 = initial_action(&scenario, rng);
        let env = Self::at(scenario, mode, episode_seed, a0)?;
        let state = env.state()?;
        Ok((env, state))
    }

    fn at(scenario: Arc<Scenario>, mode: AccessMode, episode_seed: u64, a0: ActionComposite) -> Result<Self> {
        let ch0 = draw_channels(&scenario, &mut SeededRng::stream(episode_seed, 0))?;
        let prev_eval = evaluate(&scenario, &ch0, &a0, mode)?;
        let channels = draw_channels(&scenario, &mut SeededRng::stream(episode_seed, 1))?;
        Ok(Self {
            scenario,
            mode,
            episode_seed,
            step: 1,
            channels,
            prev_action: a0,
            prev_eval,
        })
    }

    /// Starts a new episode: fresh episode seed, random initial action
    /// evaluated on frame 0, and the state for frame 1.
    pub fn reset(&mut self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        let episode_seed = rng.next_seed();
        let a0 = initial_action(&self.scenario, rng);
        *self = Self::at(self.scenario.clone(), self.mode, episode_seed, a0)?;
        self.state()
    }

    /// Evaluates `action` on the current frame, then advances to the next.
    pub fn step(&mut self, action: &ActionComposite) -> Result<StepOutcome> {
        let ev = evaluate(&self.scenario, &self.channels, action, self.mode)?;
        let r = reward(&self.scenario, &ev);
        self.step += 1;
        self.channels = draw_channels(&self.scenario, &mut SeededRng::stream(self.episode_seed, self.step))?;
        self.prev_action = action.clone();
        self.prev_eval = ev.clone();
        Ok(StepOutcome {
            state: self.state()?,
            reward: r,
            evaluation: ev,
        })
    }

    /// Evaluates `action` on the current frame without advancing.
    pub fn peek(&self, action: &ActionComposite) -> Result<Evaluation> {
        evaluate(&self.scenario, &self.channels, action, self.mode)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn previous_action(&self) -> &ActionComposite {
        &self.prev_action
    }

    pub fn state(&self) -> Result<Vec<f64>> {
        let s = &*self.scenario;
        let a = &self.prev_action;
        let ev = &self.prev_eval;
        let mut out = Vec::with_capacity(state_len(s));
        let view = LinkView::new(s, &self.channels, a)?;
        let budget = s.sbs_power_budget();
        let push_channel = |out: &mut Vec<f64>, h: &CVec, noise: f64| {
            let scale = (budget / noise).sqrt();
            for z in h {
                out.push((z.re * scale).asinh());
                out.push((z.im * scale).asinh());
            }
        };
        for k in 0..s.num_su() {
            push_channel(&mut out, &view.su_composite(k)?, s.noise_su);
        }
        for m in 0..s.num_eve() {
            for k in 0..s.num_su() {
                push_channel(&mut out, &view.eve_composite(m, k)?, s.noise_eve);
            }
        }
        out.extend(a.assignment.xi.iter().map(|&x| x as f64));
        out.extend(a.assignment.zeta.iter().map(|&x| x as f64));
        out.extend(a.theta.amplitudes.iter().flatten().map(|b| 2.0 * b - 1.0));
        out.extend(a.theta.phases.iter().flatten().map(|p| p / std::f64::consts::PI - 1.0));
        let inv = 1.0 / budget.sqrt();
        for f in &a.beams {
            for z in f {
                out.push(z.re * inv);
                out.push(z.im * inv);
            }
        }
        out.push(a.tau / s.frame_duration_s);
        out.extend(&ev.su_rates);
        out.extend(&ev.pu_rates);
        out.extend(ev.eve_rates.iter().map(|row| row.iter().copied().fold(0.0, f64::max)));
        out.push(ev.secrecy);
        debug_assert_eq!(out.len(), state_len(s));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(seed: u64) -> (Environment, Vec<f64>) {
        Environment::new(Arc::new(Scenario::tiny()), AccessMode::SensingEnhanced, &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn state_shape_and_rates() {
        let (e, s0) = env(1);
        assert_eq!(s0.len(), state_len(e.scenario()));
        let s = e.scenario();
        let tail = &s0[s0.len() - (s.num_su() + s.num_pu() + s.num_eve() + 1)..];
        assert!(tail.iter().all(|&x| x >= 0.0));
        assert!(s0.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn reset_deterministic() {
        assert_eq!(env(5).1, env(5).1);
        assert_ne!(env(5).1, env(6).1);
    }

    #[test]
    fn step_is_pure() {
        let (mut a, _) = env(3);
        let (mut b, _) = env(3);
        let act = a.previous_action().clone();
        let ra = a.step(&act).unwrap();
        let rb = b.step(&act).unwrap();
        assert_eq!(ra.reward.to_bits(), rb.reward.to_bits());
        assert_eq!(ra.state, rb.state);
        assert_eq!(a.step_index(), 2);
    }

    #[test]
    fn reward_penalties() {
        let (e, _) = env(2);
        let mut ev = e.peek(e.previous_action()).unwrap();
        let mut s = Scenario::tiny();
        s.su_min_secrecy = 0.0;
        s.pu_min_rate = 0.0;
        let raw: f64 = ev.su_rates.iter().zip(&ev.max_eve_rates).map(|(r, e)| r - e).sum();
        assert!((reward(&s, &ev) - raw).abs() < 1e-12);
        s.pu_subchannels = vec![];
        s.pu_positions.truncate(1);
        ev.pu_rates = vec![0.0];
        s.pu_min_rate = 0.5;
        assert!((reward(&s, &ev) - (raw - 0.5)).abs() < 1e-12);
    }
}
