//! Instantaneous and sensing-averaged rates, secrecy, and the constraint
//! report of the secrecy-rate maximization problem.

use super::action::ActionComposite;
use super::channels::ChannelSet;
use super::scenario::Scenario;
use super::sensing::{sense, JointProbs, SensingReport};
use crate::error::{dims, invalid, Result};
use crate::numerics::linalg::{dot_t, norm_sq};
use crate::numerics::{CMat, CVec, C64};

/// How the SBS uses a subchannel sensed busy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccessMode {
    /// Transmit in every sensing outcome.
    #[default]
    SensingEnhanced,
    /// Transmit only when the subchannel is sensed idle.
    Opportunistic,
}

/// Rates of one link in the four (sensed, actual) cases.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CaseRates {
    pub r00: f64,
    pub r10: f64,
    pub r01: f64,
    pub r11: f64,
}

impl CaseRates {
    /// Probability-weighted average under `mode`.
    pub fn average(&self, p: &JointProbs, mode: AccessMode) -> f64 {
        match mode {
            AccessMode::SensingEnhanced => p.p00 * self.r00 + p.p10 * self.r10 + p.p01 * self.r01 + p.p11 * self.r11,
            AccessMode::Opportunistic => p.p00 * self.r00 + p.p01 * self.r01,
        }
    }
}

/// `base + M^T (phi .* g)`: a direct channel plus its reflection through one
/// IRS, as a row vector over the transmit antennas.
fn through_irs(base: &CVec, m: &CMat, phi: &CVec, g: &CVec) -> CVec {
    let mut out = base.clone();
    for (n, (p, gn)) in phi.iter().zip(g).enumerate() {
        let w = p * gn;
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, h) in out.iter_mut().zip(m.row(n)) {
            *o += w * h;
        }
    }
    out
}

/// Per-evaluation cache of IRS coefficients and PU-assisting IRSs.
pub struct LinkView<'a> {
    s: &'a Scenario,
    ch: &'a ChannelSet,
    action: &'a ActionComposite,
    phis: Vec<CVec>,
    /// `z_d` for each PU and its received power from the PBS.
    pu_assist: Vec<(usize, f64)>,
}

impl<'a> LinkView<'a> {
    pub fn new(s: &'a Scenario, ch: &'a ChannelSet, action: &'a ActionComposite) -> Result<Self> {
        check_action(s, action)?;
        let phis: Vec<CVec> = (0..s.num_irs()).map(|z| action.theta.coefficients(z)).collect();
        let pu_assist = (0..s.num_pu())
            .map(|d| {
                let link = &ch.pu[d];
                let mut best = (0, f64::NEG_INFINITY);
                for z in 0..s.num_irs() {
                    let h = through_irs(&link.from_pbs, &ch.irs[z].from_pbs, &phis[z], &ch.irs[z].to_pu[d]);
                    let p = dot_t(h.view(), ch.pbs_beams[d].view()).norm_sqr();
                    if p > best.1 {
                        best = (z, p);
                    }
                }
                best
            })
            .collect();
        Ok(Self {
            s,
            ch,
            action,
            phis,
            pu_assist,
        })
    }

    /// `z*` for PU `d`: the IRS maximizing its received PBS power.
    pub fn pu_irs(&self, d: usize) -> usize {
        self.pu_assist[d].0
    }

    fn rate_factor(&self) -> f64 {
        (1.0 - self.action.tau / self.s.frame_duration_s).max(0.0)
    }

    fn assigned(&self, k: usize) -> Result<(usize, usize)> {
        let a = &self.action.assignment;
        match (a.channel_of(k), a.irs_of(k)) {
            (Some(c), Some(z)) => Ok((c, z)),
            _ => Err(invalid(format!("SU {k} must hold exactly one subchannel and one IRS"))),
        }
    }

    /// Effective SBS-side channel of SU `k` through its paired IRS.
    pub fn su_composite(&self, k: usize) -> Result<CVec> {
        let (_, z) = self.assigned(k)?;
        Ok(through_irs(
            &self.ch.su[k].from_sbs,
            &self.ch.irs[z].sbs,
            &self.phis[z],
            &self.ch.irs[z].to_su[k],
        ))
    }

    /// Effective channel from the SBS to Eve `m` through SU `k`'s IRS.
    pub fn eve_composite(&self, m: usize, k: usize) -> Result<CVec> {
        let (_, z) = self.assigned(k)?;
        Ok(through_irs(
            &self.ch.eve[m].from_sbs,
            &self.ch.irs[z].sbs,
            &self.phis[z],
            &self.ch.irs[z].to_eve[m],
        ))
    }

    /// PBS interference power on subchannel `c` at a user with direct PBS
    /// link `h_p` and IRS links `g(z)`.
    fn pbs_interference<'g>(&self, c: usize, h_p: &CVec, g: impl Fn(usize) -> &'g CVec) -> f64 {
        let mut total = 0.0;
        for d in 0..self.s.num_pu() {
            if self.ch.occupancy[[d, c]] == 0 {
                continue;
            }
            let z = self.pu_assist[d].0;
            let h = through_irs(h_p, &self.ch.irs[z].from_pbs, &self.phis[z], g(z));
            total += dot_t(h.view(), self.ch.pbs_beams[d].view()).norm_sqr();
        }
        total
    }

    /// PBS interference at SU `k` if it used subchannel `c`.
    pub fn su_pbs_interference(&self, k: usize, c: usize) -> f64 {
        self.pbs_interference(c, &self.ch.su[k].from_pbs, |z| &self.ch.irs[z].to_su[k])
    }

    /// PBS interference at Eve `m` on subchannel `c`.
    pub fn eve_pbs_interference(&self, m: usize, c: usize) -> f64 {
        self.pbs_interference(c, &self.ch.eve[m].from_pbs, |z| &self.ch.irs[z].to_eve[m])
    }

    /// Effective channel from the SBS to PU `d` through IRS `z`.
    pub fn pu_composite(&self, d: usize, z: usize) -> CVec {
        through_irs(
            &self.ch.pu[d].from_sbs,
            &self.ch.irs[z].sbs,
            &self.phis[z],
            &self.ch.irs[z].to_pu[d],
        )
    }

    fn cases(&self, signal: f64, interference: f64, noise: f64) -> CaseRates {
        let f = self.rate_factor();
        let idle = |sig: f64| f * (1.0 + sig / noise).log2();
        let r00 = idle(signal);
        let r10 = idle(signal);
        debug_assert_eq!(r00.to_bits(), r10.to_bits());
        let busy = f * (1.0 + signal / (interference + noise)).log2();
        CaseRates {
            r00,
            r10,
            r01: busy,
            r11: busy,
        }
    }

    pub fn su_cases(&self, k: usize) -> Result<CaseRates> {
        let (c, _) = self.assigned(k)?;
        let comp = self.su_composite(k)?;
        let signal = dot_t(comp.view(), self.action.beams[k].view()).norm_sqr();
        let interference = self.pbs_interference(c, &self.ch.su[k].from_pbs, |z| &self.ch.irs[z].to_su[k]);
        Ok(self.cases(signal, interference, self.s.noise_su))
    }

    pub fn eve_cases(&self, m: usize, k: usize) -> Result<CaseRates> {
        let (c, _) = self.assigned(k)?;
        let comp = self.eve_composite(m, k)?;
        let signal = dot_t(comp.view(), self.action.beams[k].view()).norm_sqr();
        let interference = self.pbs_interference(c, &self.ch.eve[m].from_pbs, |z| &self.ch.irs[z].to_eve[m]);
        Ok(self.cases(signal, interference, self.s.noise_eve))
    }

    /// SBS power received by PU `d` from the SUs on subchannel `c`.
    pub fn su_interference_at_pu(&self, d: usize, c: usize) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.s.num_su() {
            if self.action.assignment.xi[[k, c]] == 0 {
                continue;
            }
            let (_, z) = self.assigned(k)?;
            let h = through_irs(
                &self.ch.pu[d].from_sbs,
                &self.ch.irs[z].sbs,
                &self.phis[z],
                &self.ch.irs[z].to_pu[d],
            );
            total += dot_t(h.view(), self.action.beams[k].view()).norm_sqr();
        }
        Ok(total)
    }

    /// Average PU rate on its home subchannel.
    pub fn pu_rate(&self, d: usize, sensing: &SensingReport, mode: AccessMode) -> Result<f64> {
        let c = self.s.pu_subchannel(d);
        let p = &sensing.per_channel[c].probs;
        let signal = self.pu_assist[d].1;
        let interference = self.su_interference_at_pu(d, c)?;
        let noise = self.s.noise_pu;
        let with = (1.0 + signal / (interference + noise)).log2();
        Ok(match mode {
            AccessMode::SensingEnhanced => (p.p01 + p.p11) * with,
            AccessMode::Opportunistic => p.p01 * with + p.p11 * (1.0 + signal / noise).log2(),
        })
    }
}

fn check_action(s: &Scenario, a: &ActionComposite) -> Result<()> {
    let (k, c, z) = (s.num_su(), s.subchannels, s.num_irs());
    if a.assignment.xi.dim() != (k, c) {
        return Err(dims(format!("xi {k}x{c}"), format!("{:?}", a.assignment.xi.dim())));
    }
    if a.assignment.zeta.dim() != (k, z) {
        return Err(dims(format!("zeta {k}x{z}"), format!("{:?}", a.assignment.zeta.dim())));
    }
    if a.theta.num_irs() != z || a.theta.amplitudes.iter().chain(&a.theta.phases).any(|v| v.len() != s.irs_elements) {
        return Err(dims(
            format!("{z} IRSs of {} elements", s.irs_elements),
            "reflection config".to_string(),
        ));
    }
    if a.beams.len() != k || a.beams.iter().any(|f| f.len() != s.sbs_antennas) {
        return Err(dims(format!("{k} beams of {} entries", s.sbs_antennas), "beam block".to_string()));
    }
    if !(a.tau >= 0.0 && a.tau <= s.frame_duration_s) {
        return Err(invalid(format!("sensing time {} outside [0, {}]", a.tau, s.frame_duration_s)));
    }
    Ok(())
}

/// Instantaneous rates of SU `k` in the four sensing cases.
pub fn su_rate_cases(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, k: usize) -> Result<CaseRates> {
    LinkView::new(s, ch, action)?.su_cases(k)
}

/// Instantaneous rates of Eve `m` eavesdropping on SU `k`.
pub fn eve_rate_cases(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, m: usize, k: usize) -> Result<CaseRates> {
    LinkView::new(s, ch, action)?.eve_cases(m, k)
}

/// `sum_k (R_k - max_m R_{m,k})^+` with the empty max taken as 0.
pub fn secrecy_from_rates(su: &[f64], eve: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let per: Vec<f64> = su
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let worst = eve.iter().map(|row| row[k]).fold(0.0, f64::max);
            (r - worst).max(0.0)
        })
        .collect();
    let total = per.iter().sum();
    (per, total)
}

/// Signed slack of every constraint; non-negative means satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// C1: `R_d - R_d^min` per PU.
    pub pu_rate: Vec<f64>,
    /// C2: `P_f^max - P_f`, minimum over PU-occupied subchannels
    /// (`P_f^max` when none is occupied).
    pub false_alarm: f64,
    /// C3: `TP_s - sum ||f||^2` in watts.
    pub power: f64,
    /// C4: `min 1 - |b e^{j phi}|`.
    pub modulus: f64,
    /// C5: `min(b, 1-b, phi, 2pi-phi)`.
    pub bounds: f64,
    pub phases_half_open: bool,
    /// C6
    pub assignment: bool,
    /// C7
    pub pairing: bool,
    /// Interference cap of the AO baseline, `I_th - I_d` per PU.
    pub interference: Vec<f64>,
}

impl ConstraintReport {
    /// C3 to C7.
    pub fn structural_ok(&self) -> bool {
        self.power >= 0.0 && self.modulus >= 0.0 && self.bounds >= 0.0 && self.phases_half_open && self.assignment && self.pairing
    }

    pub fn c1_ok(&self) -> bool {
        self.pu_rate.iter().all(|&x| x >= 0.0)
    }

    pub fn c2_ok(&self) -> bool {
        self.false_alarm >= 0.0
    }

    pub fn all_ok(&self) -> bool {
        self.structural_ok() && self.c1_ok() && self.c2_ok()
    }
}

/// Everything the environment, the baseline and the harness need about one
/// (channels, action) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sensing: SensingReport,
    pub su_cases: Vec<CaseRates>,
    /// `R_k`
    pub su_rates: Vec<f64>,
    /// `R_{m,k}` indexed `[m][k]`.
    pub eve_rates: Vec<Vec<f64>>,
    /// `max_m R_{m,k}` per SU (0 without Eves).
    pub max_eve_rates: Vec<f64>,
    /// `R_d`
    pub pu_rates: Vec<f64>,
    /// Clamped per-SU secrecy.
    pub secrecy_per_su: Vec<f64>,
    pub secrecy: f64,
    pub constraints: ConstraintReport,
}

/// Senses, computes every rate and checks every constraint.
pub fn evaluate(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, mode: AccessMode) -> Result<Evaluation> {
    let view = LinkView::new(s, ch, action)?;
    let sensing = sense(s, ch, &action.theta, action.tau)?;
    let (k_n, m_n) = (s.num_su(), s.num_eve());
    let mut su_cases = Vec::with_capacity(k_n);
    let mut su_rates = Vec::with_capacity(k_n);
    let mut eve_rates = vec![vec![0.0; k_n]; m_n];
    for k in 0..k_n {
        let c = view.assigned(k)?.0;
        let p = &sensing.per_channel[c].probs;
        let cases = view.su_cases(k)?;
        su_rates.push(cases.average(p, mode));
        su_cases.push(cases);
        for (m, row) in eve_rates.iter_mut().enumerate() {
            row[k] = view.eve_cases(m, k)?.average(p, mode);
        }
    }
    let max_eve_rates = (0..k_n).map(|k| eve_rates.iter().map(|r| r[k]).fold(0.0, f64::max)).collect();
    let (secrecy_per_su, secrecy) = secrecy_from_rates(&su_rates, &eve_rates);
    let pu_rates = (0..s.num_pu())
        .map(|d| view.pu_rate(d, &sensing, mode))
        .collect::<Result<Vec<_>>>()?;
    let constraints = constraint_report(s, &view, &sensing, &pu_rates, mode)?;
    Ok(Evaluation {
        sensing,
        su_cases,
        su_rates,
        eve_rates,
        max_eve_rates,
        pu_rates,
        secrecy_per_su,
        secrecy,
        constraints,
    })
}

fn constraint_report(
    s: &Scenario,
    view: &LinkView,
    sensing: &SensingReport,
    pu_rates: &[f64],
    mode: AccessMode,
) -> Result<ConstraintReport> {
    let a = view.action;
    let false_alarm = sensing
        .per_channel
        .iter()
        .filter(|c| c.occupied)
        .map(|c| s.max_false_alarm_prob - c.false_alarm)
        .fold(s.max_false_alarm_prob, f64::min);
    let factor = view.rate_factor();
    let interference = (0..s.num_pu())
        .map(|d| {
            let c = s.pu_subchannel(d);
            let p = &sensing.per_channel[c].probs;
            let weight = match mode {
                AccessMode::SensingEnhanced => p.p01 + p.p11,
                AccessMode::Opportunistic => p.p01,
            };
            Ok(s.interference_threshold - factor * weight * view.su_interference_at_pu(d, c)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintReport {
        pu_rate: pu_rates.iter().map(|r| r - s.pu_min_rate).collect(),
        false_alarm,
        power: s.sbs_power_budget() - a.beam_power(),
        modulus: a.theta.modulus_slack(),
        bounds: a.theta.bound_slack(),
        phases_half_open: a.theta.phases_half_open(),
        assignment: a.assignment.c6_valid(),
        pairing: a.assignment.c7_valid(),
        interference,
    })
}

/// Convenience for callers holding only an SU's composite channel.
pub fn beam_gain(composite: &CVec, beam: &CVec) -> f64 {
    dot_t(composite.view(), beam.view()).norm_sqr()
}

/// Power of a beam.
pub fn beam_power(beam: &CVec) -> f64 {
    norm_sq(beam.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::action::{Assignment, ReflectionConfig};
    use crate::env::channels::draw_channels;
    use crate::numerics::SeededRng;
    use ndarray::Array1;

    fn setup(seed: u64) -> (Scenario, ChannelSet, ActionComposite) {
        let s = Scenario::tiny();
        let ch = draw_channels(&s, &mut SeededRng::new(seed)).unwrap();
        let amp = (s.sbs_power_budget() / (s.num_su() * s.sbs_antennas) as f64).sqrt();
        let a = ActionComposite {
            assignment: Assignment::from_maps(&[0, 1], &[0, 1], s.subchannels, s.num_irs()).unwrap(),
            theta: ReflectionConfig::identity(s.num_irs(), s.irs_elements),
            beams: vec![Array1::from_elem(s.sbs_antennas, C64::new(amp, 0.0)); s.num_su()],
            tau: s.frame_duration_s / 10.0,
        };
        (s, ch, a)
    }

    #[test]
    fn full_sensing_time_zeroes_rates() {
        let (s, ch, mut a) = setup(1);
        a.tau = s.frame_duration_s;
        let r = su_rate_cases(&s, &ch, &a, 0).unwrap();
        assert_eq!(r, CaseRates::default());
        let e = eve_rate_cases(&s, &ch, &a, 0, 1).unwrap();
        assert_eq!(e, CaseRates::default());
    }

    #[test]
    fn no_occupancy_means_no_interference() {
        let (s, mut ch, a) = setup(2);
        ch.occupancy.fill(0);
        let r = su_rate_cases(&s, &ch, &a, 1).unwrap();
        assert_eq!(r.r01, r.r00);
        assert_eq!(r.r00, r.r10);
    }

    #[test]
    fn zero_beam_zero_rates() {
        let (s, ch, mut a) = setup(3);
        a.beams[0].fill(C64::new(0.0, 0.0));
        assert_eq!(su_rate_cases(&s, &ch, &a, 0).unwrap(), CaseRates::default());
        assert_eq!(eve_rate_cases(&s, &ch, &a, 0, 0).unwrap(), CaseRates::default());
    }

    #[test]
    fn colocated_eve_matches_su() {
        let (mut s, _, a) = setup(4);
        s.eve_positions[0] = s.su_positions[1];
        s.noise_eve = s.noise_su;
        let mut ch = draw_channels(&s, &mut SeededRng::new(4)).unwrap();
        ch.eve[0] = ch.su[1].clone();
        for z in 0..s.num_irs() {
            ch.irs[z].to_eve[0] = ch.irs[z].to_su[1].clone();
        }
        let su = su_rate_cases(&s, &ch, &a, 1).unwrap();
        let eve = eve_rate_cases(&s, &ch, &a, 0, 1).unwrap();
        assert_eq!(su, eve);
    }

    #[test]
    fn hand_averages() {
        let s = Scenario::default_preset();
        let p = crate::env::sensing::joint_state_probs(0.1, &s, 0);
        let r = CaseRates {
            r00: 1.0,
            r10: 1.0,
            r01: 0.5,
            r11: 0.5,
        };
        assert!((r.average(&p, AccessMode::SensingEnhanced) - 0.90).abs() < 1e-12);
        let flat = CaseRates {
            r00: 0.7,
            r10: 0.7,
            r01: 0.7,
            r11: 0.7,
        };
        assert!((flat.average(&p, AccessMode::SensingEnhanced) - 0.7).abs() < 1e-12);
        let opp = r.average(&p, AccessMode::Opportunistic);
        assert!((opp - (0.72 + 0.01)).abs() < 1e-12);
    }

    #[test]
    fn secrecy_clamp_and_empty_max() {
        let (per, total) = secrecy_from_rates(&[1.0, 2.0], &[vec![1.5, 0.5]]);
        assert_eq!(per, vec![0.0, 1.5]);
        assert_eq!(total, 1.5);
        let (_, total) = secrecy_from_rates(&[1.0, 2.0], &[]);
        assert_eq!(total, 3.0);
    }

    #[test]
    fn pu_rate_limits() {
        let (s, ch, mut a) = setup(5);
        let ev = evaluate(&s, &ch, &a, AccessMode::SensingEnhanced).unwrap();
        assert!(ev.pu_rates.iter().all(|&r| r > 0.0));
        for b in a.beams.iter_mut() {
            b.fill(C64::new(0.0, 0.0));
        }
        let view = LinkView::new(&s, &ch, &a).unwrap();
        let sensing = &ev.sensing;
        for d in 0..s.num_pu() {
            let c = s.pu_subchannel(d);
            let p = sensing.per_channel[c].probs;
            let want = (p.p01 + p.p11) * (1.0 + view.pu_assist[d].1 / s.noise_pu).log2();
            assert!((view.pu_rate(d, sensing, AccessMode::SensingEnhanced).unwrap() - want).abs() < 1e-12);
        }
        let mut always_idle = s.clone();
        always_idle.idle_prior = vec![1.0; s.subchannels];
        let ev = evaluate(&always_idle, &ch, &a, AccessMode::SensingEnhanced).unwrap();
        assert!(ev.pu_rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_irs_forces_pu_assist() {
        let mut s = Scenario::tiny();
        s.irs_positions.truncate(1);
        let ch = draw_channels(&s, &mut SeededRng::new(6)).unwrap();
        let a = ActionComposite {
            assignment: Assignment::from_maps(&[0, 1], &[0, 0], 2, 1).unwrap(),
            theta: ReflectionConfig::identity(1, s.irs_elements),
            beams: vec![Array1::from_elem(s.sbs_antennas, C64::new(0.1, 0.0)); 2],
            tau: 0.01,
        };
        let view = LinkView::new(&s, &ch, &a).unwrap();
        assert_eq!(view.pu_irs(0), 0);
        assert_eq!(view.pu_irs(1), 0);
    }

    #[test]
    fn constraint_report_signs() {
        let (s, ch, mut a) = setup(7);
        let ev = evaluate(&s, &ch, &a, AccessMode::SensingEnhanced).unwrap();
        assert!(ev.constraints.structural_ok());
        for b in a.beams.iter_mut() {
            b.mapv_inplace(|z| z * 2.0);
        }
        let ev = evaluate(&s, &ch, &a, AccessMode::SensingEnhanced).unwrap();
        assert!(ev.constraints.power < 0.0);
    }

    #[test]
    fn unassigned_su_rejected() {
        let (s, ch, mut a) = setup(8);
        a.assignment.xi[[0, 0]] = 0;
        assert!(su_rate_cases(&s, &ch, &a, 0).is_err());
    }
}
