//! Energy-detection spectrum sensing at the SBS.

use super::action::ReflectionConfig;
use super::channels::ChannelSet;
use super::scenario::Scenario;
use crate::error::{invalid, Result};
use crate::numerics::{q_function, q_inverse};

/// Joint (sensed, actual) state probabilities of one subchannel. The first
/// digit is the sensing outcome, the second the true PU activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointProbs {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl JointProbs {
    pub fn total(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelSensing {
    /// IRS assisting the sensing of this subchannel.
    pub irs: usize,
    pub snr: f64,
    pub threshold: f64,
    pub false_alarm: f64,
    pub probs: JointProbs,
    /// Whether a PU occupies the subchannel in this realization.
    pub occupied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingReport {
    pub per_channel: Vec<SubchannelSensing>,
}

/// `||h_{p,s}^H + g_{z,s}^H Phi_z H_z||_F^2`, the sensing-path gain of IRS
/// `z` before the `alpha_c` factor.
pub fn sensing_path_gain(ch: &ChannelSet, theta: &ReflectionConfig, z: usize) -> f64 {
    let link = &ch.irs[z];
    let phi = theta.coefficients(z);
    let (np, ns) = ch.pbs_to_sbs.dim();
    let nn = phi.len();
    let mut total = 0.0;
    for i in 0..ns {
        for j in 0..np {
            let mut v = ch.pbs_to_sbs[[j, i]].conj();
            for n in 0..nn {
                v += link.sbs[[n, i]].conj() * phi[n] * link.from_pbs[[n, j]];
            }
            total += v.norm_sqr();
        }
    }
    total
}

/// `gamma_{z,c}`, the sensing SNR at the SBS on subchannel `c` with IRS `z`.
pub fn sensing_snr(s: &Scenario, ch: &ChannelSet, theta: &ReflectionConfig, z: usize, c: usize) -> f64 {
    let alpha = ch.sensing_alpha(c, s.noise_sensing);
    if alpha == 0.0 {
        return 0.0;
    }
    sensing_path_gain(ch, theta, z) * alpha
}

fn check_tau(s: &Scenario, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < s.frame_duration_s) {
        return Err(invalid(format!(
            "sensing time {tau} s must lie strictly inside (0, {})",
            s.frame_duration_s
        )));
    }
    Ok(())
}

/// Energy-detector threshold achieving the target detection probability.
pub fn detection_threshold(gamma: f64, tau: f64, s: &Scenario) -> Result<f64> {
    check_tau(s, tau)?;
    let samples = tau * s.sampling_frequency_hz;
    if samples < 1.0 {
        return Err(invalid(format!("sensing window holds {samples} samples, need at least 1")));
    }
    let ns = s.sbs_antennas as f64;
    let qi = q_inverse(s.target_detection_prob)?;
    Ok((qi * ((2.0 * gamma + ns) / samples).sqrt() + gamma + ns) * s.noise_sensing)
}

/// False-alarm probability at the threshold of [`detection_threshold`].
pub fn false_alarm_prob(gamma: f64, tau: f64, s: &Scenario) -> Result<f64> {
    check_tau(s, tau)?;
    let ns = s.sbs_antennas as f64;
    let qi = q_inverse(s.target_detection_prob)?;
    let arg = ((2.0 * gamma + 1.0) / ns).sqrt() * qi + (tau * s.sampling_frequency_hz / ns).sqrt() * gamma;
    q_function(arg)
}

pub fn joint_state_probs(false_alarm: f64, s: &Scenario, c: usize) -> JointProbs {
    let idle = s.idle_prior[c];
    let busy = 1.0 - idle;
    let pd = s.target_detection_prob;
    JointProbs {
        p00: idle * (1.0 - false_alarm),
        p10: idle * false_alarm,
        p01: busy * (1.0 - pd),
        p11: busy * pd,
    }
}

/// Senses every subchannel, each with the IRS maximizing its sensing SNR
/// (lowest index on ties).
pub fn sense(s: &Scenario, ch: &ChannelSet, theta: &ReflectionConfig, tau: f64) -> Result<SensingReport> {
    check_tau(s, tau)?;
    let gains: Vec<f64> = (0..s.num_irs()).map(|z| sensing_path_gain(ch, theta, z)).collect();
    let (best_irs, best_gain) = gains
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (z, &g)| if g > acc.1 { (z, g) } else { acc });
    let mut per_channel = Vec::with_capacity(s.subchannels);
    for c in 0..s.subchannels {
        let alpha = ch.sensing_alpha(c, s.noise_sensing);
        let snr = best_gain * alpha;
        let false_alarm = false_alarm_prob(snr, tau, s)?;
        per_channel.push(SubchannelSensing {
            irs: best_irs,
            snr,
            threshold: detection_threshold(snr, tau, s)?,
            false_alarm,
            probs: joint_state_probs(false_alarm, s, c),
            occupied: alpha > 0.0,
        });
    }
    Ok(SensingReport { per_channel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::channels::draw_channels;
    use crate::numerics::SeededRng;

    fn unit_scenario() -> Scenario {
        let mut s = Scenario::default_preset();
        s.noise_sensing = 1.0;
        s.target_detection_prob = 0.9;
        s.sampling_frequency_hz = 6e6;
        s.sbs_antennas = 6;
        s
    }

    #[test]
    fn threshold_median_detection() {
        let mut s = unit_scenario();
        s.target_detection_prob = 0.5;
        let eps = detection_threshold(0.0, 1e-3, &s).unwrap();
        assert!((eps - 6.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_hand_substitution() {
        let s = unit_scenario();
        // Q^{-1}(0.9) = -1.2815515655446004, sqrt(8/6000) = 0.036514837167011
        let expected = -1.2815515655446004 * (8.0f64 / 6000.0).sqrt() + 7.0;
        let eps = detection_threshold(1.0, 1e-3, &s).unwrap();
        assert!((eps - expected).abs() < 1e-9);
        assert!((eps - 6.953204).abs() < 1e-5);
    }

    #[test]
    fn threshold_increasing_in_gamma_below_median() {
        let mut s = unit_scenario();
        s.target_detection_prob = 0.3;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..2000 {
            let g = i as f64 * 0.01;
            let e = detection_threshold(g, 1e-3, &s).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn false_alarm_hand_substitution() {
        let s = unit_scenario();
        let pf0 = false_alarm_prob(0.0, 1e-3, &s).unwrap();
        let want0 = q_function(q_inverse(0.9).unwrap() / 6f64.sqrt()).unwrap();
        assert!((pf0 - want0).abs() < 1e-12);
        // gamma = 1, tau fs = 6000: arg = sqrt(0.5)(-1.28155) + sqrt(1000)
        let arg = (0.5f64).sqrt() * -1.2815515655446004 + 1000f64.sqrt();
        let pf1 = false_alarm_prob(1.0, 1e-3, &s).unwrap();
        assert!((pf1 - 0.5 * libm_erfc(arg / 2f64.sqrt())).abs() < 1e-15);
        let arg = (1.02f64 / 6.0).sqrt() * -1.2815515655446004 + 1000f64.sqrt() * 0.01;
        let pf = false_alarm_prob(0.01, 1e-3, &s).unwrap();
        assert!((pf - 0.5 * libm_erfc(arg / 2f64.sqrt())).abs() < 1e-12);
        assert!((pf - 0.5841).abs() < 1e-3);
    }

    fn libm_erfc(x: f64) -> f64 {
        libm::erfc(x)
    }

    #[test]
    fn false_alarm_decreasing_in_tau() {
        let s = unit_scenario();
        let mut prev = 1.0;
        for i in 1..99 {
            let pf = false_alarm_prob(0.05, i as f64 * 1e-3, &s).unwrap();
            assert!(pf < prev);
            prev = pf;
        }
    }

    #[test]
    fn joint_probs_default_priors() {
        let s = Scenario::default_preset();
        let p = joint_state_probs(0.1, &s, 0);
        assert!((p.p01 - 0.02).abs() < 1e-12);
        assert!((p.p11 - 0.18).abs() < 1e-12);
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert_eq!(joint_state_probs(0.0, &s, 0).p10, 0.0);
    }

    #[test]
    fn snr_properties() {
        let s = Scenario::tiny();
        let mut rng = SeededRng::new(4);
        let mut ch = draw_channels(&s, &mut rng).unwrap();
        ch.occupancy.fill(0);
        ch.occupancy[[0, 0]] = 1;
        let theta = ReflectionConfig::identity(s.num_irs(), s.irs_elements);
        assert_eq!(sensing_snr(&s, &ch, &theta, 0, 1), 0.0);
        let off = ReflectionConfig::absorbing(s.num_irs(), s.irs_elements);
        let direct: f64 = ch.pbs_to_sbs.iter().map(|z| z.norm_sqr()).sum();
        let g = sensing_snr(&s, &ch, &off, 1, 0);
        let alpha = ch.sensing_alpha(0, s.noise_sensing);
        assert!((g - direct * alpha).abs() <= 1e-12 * g);
        let g1 = sensing_snr(&s, &ch, &theta, 1, 0);
        ch.pbs_beams[0].mapv_inplace(|z| z * 2f64.sqrt());
        let g2 = sensing_snr(&s, &ch, &theta, 1, 0);
        assert!((g2 - 2.0 * g1).abs() <= 1e-9 * g2);
    }

    #[test]
    fn rejects_bad_tau() {
        let s = Scenario::tiny();
        assert!(false_alarm_prob(1.0, 0.0, &s).is_err());
        assert!(detection_threshold(1.0, s.frame_duration_s, &s).is_err());
    }
}
