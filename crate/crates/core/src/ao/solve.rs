//! The four blocks and the outer alternating loop.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::assign::assign_subchannels;
use super::power::{dual_step, optimal_power, Branch, DualVars, SecrecyTerm};
use super::sca::{sca_reflection, ScaConfig};
use super::sensing_time::search_sensing_time;
use crate::env::rates::LinkView;
use crate::env::sensing::sense;
use crate::env::{evaluate, AccessMode, ActionComposite, Assignment, ChannelSet, Evaluation, ReflectionConfig, Scenario};
use crate::error::{Error, Result};
use crate::numerics::linalg::{dot_t, norm_sq};
use crate::numerics::{CVec, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AoConfig {
    /// Outer iteration cap.
    pub max_iters: usize,
    /// Relative objective gain below which the outer loop stops.
    pub tolerance: f64,
    /// Run exactly `max_iters` outer iterations.
    pub fixed_iterations: bool,
    /// Subgradient iterations of the beamforming block.
    pub dual_iters: usize,
    /// `s0` of the dual step `s0 / sqrt(t)`.
    pub dual_step0: f64,
    pub sca_iters: usize,
    pub sca_inner_iters: usize,
    pub sca_tolerance: f64,
    /// Sensing-time grid points over `[0.01 T, 0.99 T]`.
    pub tau_points: usize,
    /// Restart from every IRS (all SUs paired with it) and keep the best
    /// run, instead of a single start from IRS 0.
    pub multi_start: bool,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tolerance: 1e-6,
            fixed_iterations: false,
            dual_iters: 30,
            dual_step0: 0.1,
            sca_iters: 20,
            sca_inner_iters: 500,
            sca_tolerance: 1e-6,
            tau_points: 99,
            multi_start: true,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.dual_iters == 0 || self.sca_iters == 0 || self.sca_inner_iters == 0 {
            return Err(Error::Config("AO iteration caps must be at least 1".into()));
        }
        if self.tau_points < 2 {
            return Err(Error::Config("tau_points must be at least 2".into()));
        }
        if !(self.tolerance > 0.0 && self.sca_tolerance > 0.0 && self.dual_step0 > 0.0) {
            return Err(Error::Config("AO tolerances and dual step must be positive".into()));
        }
        Ok(())
    }

    fn sca(&self) -> ScaConfig {
        ScaConfig {
            outer_iters: self.sca_iters,
            inner_iters: self.sca_inner_iters,
            tolerance: self.sca_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Init,
    Beamforming,
    Pairing,
    Reflection,
    SensingTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub block: Block,
    /// Sum secrecy after the block.
    pub objective: f64,
    /// Whether the block's candidate replaced the incumbent.
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub action: ActionComposite,
    pub evaluation: Evaluation,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    /// Set when the loop stopped at the cap with the objective still moving.
    pub cap_reached: bool,
}

impl AoOutcome {
    pub fn objective(&self) -> f64 {
        self.evaluation.secrecy
    }
}

/// Unit MRT direction along `h` (uniform when `h` vanishes).
pub fn mrt_direction(h: &CVec) -> CVec {
    let n = norm_sq(h.view()).sqrt();
    if n > 0.0 {
        h.mapv(|z| z.conj() / n)
    } else {
        let v = 1.0 / (h.len() as f64).sqrt();
        CVec::from_elem(h.len(), C64::new(v, 0.0))
    }
}

/// MRT beams along each SU's composite channel with the given powers.
pub fn mrt_beams(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, powers: &[f64]) -> Result<Vec<CVec>> {
    let view = LinkView::new(s, ch, action)?;
    let mut beams = (0..s.num_su())
        .map(|k| Ok(mrt_direction(&view.su_composite(k)?).mapv(|z| z * powers[k].max(0.0).sqrt())))
        .collect::<Result<Vec<_>>>()?;
    crate::env::action::project_beams(&mut beams, s.sbs_power_budget());
    Ok(beams)
}

fn powers_of(action: &ActionComposite) -> Vec<f64> {
    action.beams.iter().map(|f| norm_sq(f.view())).collect()
}

fn branch_weights(mode: AccessMode, p: &crate::env::JointProbs) -> (f64, f64) {
    match mode {
        AccessMode::SensingEnhanced => (p.p00 + p.p10, p.p01 + p.p11),
        AccessMode::Opportunistic => (p.p00, p.p01),
    }
}

/// Secrecy terms and PU leakage per (SU, subchannel) for MRT directions at
/// the current pairing, reflection and sensing time.
struct PowerProblem {
    terms: Vec<Vec<SecrecyTerm>>,
    /// Interference per watt at the worst PU homed on the subchannel,
    /// already weighted by the rate factor and busy probability.
    leakage: Array2<f64>,
    directions: Vec<CVec>,
}

fn power_problem(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, mode: AccessMode) -> Result<PowerProblem> {
    let view = LinkView::new(s, ch, action)?;
    let report = sense(s, ch, &action.theta, action.tau)?;
    let factor = (1.0 - action.tau / s.frame_duration_s).max(0.0);
    let (k_n, c_n) = (s.num_su(), s.subchannels);
    let per_su = s.sbs_power_budget() / k_n as f64;
    let mut directions = Vec::with_capacity(k_n);
    let mut terms = Vec::with_capacity(k_n);
    let mut leakage = Array2::zeros((k_n, c_n));
    for k in 0..k_n {
        let u = view.su_composite(k)?;
        let dir = mrt_direction(&u);
        let a_gain = dot_t(u.view(), dir.view()).norm_sqr();
        let b_gain: Vec<f64> = (0..s.num_eve())
            .map(|m| Ok(dot_t(view.eve_composite(m, k)?.view(), dir.view()).norm_sqr()))
            .collect::<Result<_>>()?;
        let z = action.assignment.irs_of(k).unwrap_or(0);
        let mut row = Vec::with_capacity(c_n);
        for c in 0..c_n {
            let (w0, w1) = branch_weights(mode, &report.per_channel[c].probs);
            let i_k = view.su_pbs_interference(k, c);
            let branches_for = |m: Option<usize>| -> Vec<Branch> {
                let (b, i_m) = m.map_or((0.0, 0.0), |m| (b_gain[m], view.eve_pbs_interference(m, c)));
                vec![
                    Branch {
                        weight: w0,
                        a: a_gain / s.noise_su,
                        b: b / s.noise_eve,
                    },
                    Branch {
                        weight: w1,
                        a: a_gain / (i_k + s.noise_su),
                        b: b / (i_m + s.noise_eve),
                    },
                ]
            };
            // strongest eavesdropper at an equal power split
            let eve_rate = |m: usize| -> f64 { branches_for(Some(m)).iter().map(|br| br.weight * (br.b * per_su).ln_1p()).sum() };
            let worst = (0..s.num_eve()).fold(None, |best: Option<(usize, f64)>, m| {
                let r = eve_rate(m);
                match best {
                    Some((_, v)) if v >= r => best,
                    _ => Some((m, r)),
                }
            });
            row.push(SecrecyTerm {
                factor,
                branches: branches_for(worst.map(|w| w.0)),
            });
            let y = (0..s.num_pu())
                .filter(|&d| s.pu_subchannel(d) == c)
                .map(|d| dot_t(view.pu_composite(d, z).view(), dir.view()).norm_sqr())
                .fold(0.0, f64::max);
            leakage[[k, c]] = factor * w1 * y;
        }
        terms.push(row);
        directions.push(dir);
    }
    Ok(PowerProblem {
        terms,
        leakage,
        directions,
    })
}

fn is_c2_ok(ev: &Evaluation) -> bool {
    ev.constraints.c2_ok()
}

/// Joint beamforming and subchannel assignment at fixed pairing, reflection
/// and sensing time. Runs projected dual subgradient iterations, rounds each
/// iterate through the indicator matrix, and returns the best iterate by sum
/// secrecy, preferring iterates within the interference cap.
pub fn beamforming_assignment(
    s: &Scenario,
    ch: &ChannelSet,
    action: &ActionComposite,
    mode: AccessMode,
    cfg: &AoConfig,
) -> Result<(ActionComposite, DualVars)> {
    let prob = power_problem(s, ch, action, mode)?;
    let (k_n, c_n) = (s.num_su(), s.subchannels);
    let budget = s.sbs_power_budget();
    let ith = s.interference_threshold;
    let irs: Vec<usize> = (0..k_n).map(|k| action.assignment.irs_of(k).unwrap_or(0)).collect();
    let mut duals = DualVars::zeros(c_n);
    let mut best: Option<(bool, f64, ActionComposite, DualVars)> = None;
    for t in 1..=cfg.dual_iters {
        let mut x = Array2::zeros((k_n, c_n));
        let mut h = Array2::zeros((k_n, c_n));
        for k in 0..k_n {
            for c in 0..c_n {
                let price = duals.varsigma / budget + duals.omega[c] * prob.leakage[[k, c]] / ith;
                let p = optimal_power(&prob.terms[k][c], price, budget);
                x[[k, c]] = p;
                h[[k, c]] = prob.terms[k][c].indicator(p);
            }
        }
        let chans = assign_subchannels(&h);
        let mut loads = vec![0.0; c_n];
        let mut powers = vec![0.0; k_n];
        for (k, &c) in chans.iter().enumerate() {
            powers[k] = x[[k, c]];
            loads[c] += prob.leakage[[k, c]] * powers[k] / ith;
            duals.nu[c] = h[[k, c]];
        }
        let total: f64 = powers.iter().sum();
        let mut beams: Vec<CVec> = prob
            .directions
            .iter()
            .zip(&powers)
            .map(|(d, &p)| d.mapv(|z| z * p.sqrt()))
            .collect();
        crate::env::action::project_beams(&mut beams, budget);
        let cand = ActionComposite {
            assignment: Assignment::from_maps(&chans, &irs, c_n, s.num_irs())?,
            theta: action.theta.clone(),
            beams,
            tau: action.tau,
        };
        let ev = evaluate(s, ch, &cand, mode)?;
        let within = ev.constraints.interference.iter().all(|&v| v >= 0.0);
        let better = match &best {
            None => true,
            Some((w, obj, _, _)) => (within && !w) || (within == *w && ev.secrecy > *obj),
        };
        if better {
            best = Some((within, ev.secrecy, cand, duals.clone()));
        }
        duals.update(&loads, total / budget, dual_step(cfg.dual_step0, t));
    }
    let (_, _, cand, d) = best.expect("at least one dual iteration");
    Ok((cand, d))
}

/// IRS of every SU. Each SU takes the IRS maximizing its own secrecy rate
/// with an MRT beam of unchanged power, among IRSs keeping the PU on its
/// subchannel within the interference cap (the least violating one when
/// none does).
pub fn pair_irs(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, mode: AccessMode) -> Result<Vec<usize>> {
    let powers = powers_of(action);
    let k_n = s.num_su();
    let chans: Vec<usize> = (0..k_n).map(|k| action.assignment.channel_of(k).unwrap_or(k)).collect();
    let mut irs: Vec<usize> = (0..k_n).map(|k| action.assignment.irs_of(k).unwrap_or(0)).collect();
    let mut out = irs.clone();
    for k in 0..k_n {
        // (feasible, slack or objective) per candidate
        let mut best: Option<(bool, f64, usize)> = None;
        for z in 0..s.num_irs() {
            irs[k] = z;
            let mut cand = action.clone();
            cand.assignment = Assignment::from_maps(&chans, &irs, s.subchannels, s.num_irs())?;
            cand.beams = mrt_beams(s, ch, &cand, &powers)?;
            let ev = evaluate(s, ch, &cand, mode)?;
            let score = ev.su_rates[k] - ev.max_eve_rates[k];
            let slack = (0..s.num_pu())
                .filter(|&d| s.pu_subchannel(d) == chans[k])
                .map(|d| ev.constraints.interference[d])
                .fold(f64::INFINITY, f64::min);
            let ok = slack >= 0.0;
            let key = if ok { score } else { slack };
            let better = match best {
                None => true,
                Some((bok, bkey, _)) => (ok && !bok) || (ok == bok && key > bkey),
            };
            if better {
                best = Some((ok, key, z));
            }
        }
        irs[k] = action.assignment.irs_of(k).unwrap_or(0);
        out[k] = best.expect("at least one IRS").2;
    }
    Ok(out)
}

/// Best sensing time on the configured grid for fixed everything else.
pub fn best_sensing_time(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, mode: AccessMode, points: usize) -> Result<f64> {
    let t = s.frame_duration_s;
    let mut err = None;
    let tau = search_sensing_time(0.01 * t, 0.99 * t, points, |tau| {
        let mut cand = action.clone();
        cand.tau = tau;
        match evaluate(s, ch, &cand, mode) {
            Ok(ev) => (ev.secrecy, ev.constraints.false_alarm),
            Err(e) => {
                err.get_or_insert(e);
                (f64::NEG_INFINITY, f64::NEG_INFINITY)
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(tau),
    }
}

struct Incumbent {
    action: ActionComposite,
    eval: Evaluation,
}

impl Incumbent {
    /// Takes `cand` when it does not lower the objective and does not break
    /// the false-alarm constraint.
    fn offer(&mut self, s: &Scenario, ch: &ChannelSet, cand: ActionComposite, mode: AccessMode) -> Result<bool> {
        let ev = evaluate(s, ch, &cand, mode)?;
        let keeps_c2 = is_c2_ok(&ev) || !is_c2_ok(&self.eval);
        if keeps_c2 && ev.secrecy >= self.eval.secrecy {
            self.action = cand;
            self.eval = ev;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

/// Alternating optimization over beamforming with assignment, IRS pairing,
/// reflection and sensing time, with full knowledge of `ch`.
///
/// Every block's result is kept only if it does not lower the sum secrecy,
/// so the trace of each run is non-decreasing. With
/// [`AoConfig::multi_start`] one run starts from each IRS and the best run
/// is returned with its own trace.
pub fn ao_solve(s: &Scenario, ch: &ChannelSet, mode: AccessMode, cfg: &AoConfig) -> Result<AoOutcome> {
    s.validate()?;
    cfg.validate()?;
    let starts = if cfg.multi_start { s.num_irs() } else { 1 };
    let mut best: Option<AoOutcome> = None;
    for z in 0..starts {
        let out = solve_from(s, ch, mode, cfg, z)?;
        if best.as_ref().is_none_or(|b| out.objective() > b.objective()) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one start");
    if best.cap_reached {
        log::warn!(
            "AO stopped at the iteration cap of {} with the objective still improving",
            cfg.max_iters
        );
    }
    Ok(best)
}

fn solve_from(s: &Scenario, ch: &ChannelSet, mode: AccessMode, cfg: &AoConfig, start_irs: usize) -> Result<AoOutcome> {
    let k_n = s.num_su();
    let chans: Vec<usize> = (0..k_n).collect();
    let irs = vec![start_irs; k_n];
    let mut start = ActionComposite {
        assignment: Assignment::from_maps(&chans, &irs, s.subchannels, s.num_irs())?,
        theta: ReflectionConfig::identity(s.num_irs(), s.irs_elements),
        beams: vec![CVec::zeros(s.sbs_antennas); k_n],
        tau: 0.1 * s.frame_duration_s,
    };
    let equal = vec![s.sbs_power_budget() / k_n as f64; k_n];
    start.beams = mrt_beams(s, ch, &start, &equal)?;
    start.tau = best_sensing_time(s, ch, &start, mode, cfg.tau_points)?;
    // shape the starting IRS first, so each start explores its own pairing
    start.theta = sca_reflection(s, ch, &start, mode, &cfg.sca())?;
    start.beams = mrt_beams(s, ch, &start, &equal)?;
    let eval = evaluate(s, ch, &start, mode)?;
    let mut inc = Incumbent { action: start, eval };
    let mut trace = vec![TraceEntry {
        iteration: 0,
        block: Block::Init,
        objective: inc.eval.secrecy,
        accepted: true,
    }];
    let mut iterations = 0;
    let mut cap_reached = true;
    for it in 1..=cfg.max_iters {
        iterations = it;
        let before = inc.eval.secrecy;

        let (cand, _) = beamforming_assignment(s, ch, &inc.action, mode, cfg)?;
        let ok = inc.offer(s, ch, cand, mode)?;
        trace.push(TraceEntry {
            iteration: it,
            block: Block::Beamforming,
            objective: inc.eval.secrecy,
            accepted: ok,
        });

        let pairing = pair_irs(s, ch, &inc.action, mode)?;
        let mut cand = inc.action.clone();
        let chans: Vec<usize> = (0..k_n).map(|k| cand.assignment.channel_of(k).unwrap_or(k)).collect();
        cand.assignment = Assignment::from_maps(&chans, &pairing, s.subchannels, s.num_irs())?;
        cand.beams = mrt_beams(s, ch, &cand, &powers_of(&inc.action))?;
        let ok = inc.offer(s, ch, cand, mode)?;
        trace.push(TraceEntry {
            iteration: it,
            block: Block::Pairing,
            objective: inc.eval.secrecy,
            accepted: ok,
        });

        let mut cand = inc.action.clone();
        cand.theta = sca_reflection(s, ch, &inc.action, mode, &cfg.sca())?;
        let ok = inc.offer(s, ch, cand, mode)?;
        trace.push(TraceEntry {
            iteration: it,
            block: Block::Reflection,
            objective: inc.eval.secrecy,
            accepted: ok,
        });

        let mut cand = inc.action.clone();
        cand.tau = best_sensing_time(s, ch, &inc.action, mode, cfg.tau_points)?;
        let ok = inc.offer(s, ch, cand, mode)?;
        trace.push(TraceEntry {
            iteration: it,
            block: Block::SensingTime,
            objective: inc.eval.secrecy,
            accepted: ok,
        });

        let gain = inc.eval.secrecy - before;
        let settled = gain <= cfg.tolerance * inc.eval.secrecy.abs().max(1.0);
        cap_reached = !settled;
        if settled && !cfg.fixed_iterations {
            break;
        }
    }
    Ok(AoOutcome {
        action: inc.action,
        evaluation: inc.eval,
        trace,
        iterations,
        cap_reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::draw_channels;
    use crate::numerics::SeededRng;

    #[test]
    fn solve_is_monotone_and_feasible() {
        let s = Scenario::tiny();
        for seed in 0..3 {
            let ch = draw_channels(&s, &mut SeededRng::new(seed)).unwrap();
            let out = ao_solve(&s, &ch, AccessMode::SensingEnhanced, &AoConfig::default()).unwrap();
            assert!(out.trace.windows(2).all(|w| w[1].objective >= w[0].objective));
            assert!(out.evaluation.constraints.structural_ok());
            assert!(out.objective() >= out.trace[0].objective);
        }
    }

    #[test]
    fn fixed_iterations_run_to_the_cap() {
        let s = Scenario::tiny();
        let ch = draw_channels(&s, &mut SeededRng::new(5)).unwrap();
        let cfg = AoConfig {
            max_iters: 3,
            fixed_iterations: true,
            ..AoConfig::default()
        };
        let out = ao_solve(&s, &ch, AccessMode::SensingEnhanced, &cfg).unwrap();
        assert_eq!(out.iterations, 3);
        assert_eq!(out.trace.len(), 1 + 4 * 3);
    }

    #[test]
    fn config_validation() {
        assert!(AoConfig {
            max_iters: 0,
            ..AoConfig::default()
        }
        .validate()
        .is_err());
        assert!(AoConfig {
            tau_points: 1,
            ..AoConfig::default()
        }
        .validate()
        .is_err());
        assert!(serde_json::from_str::<AoConfig>(r#"{"nope": 1}"#).is_err());
    }
}
