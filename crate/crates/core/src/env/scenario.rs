//! Immutable experiment definition and its JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::dbm_to_watts;

pub const SCENARIO_VERSION: u32 = 1;

pub type Position = [f64; 3];

/// Reward shaping for the MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the per-SU secrecy shortfall penalty.
    pub nu_s: f64,
    /// Weight of the per-PU rate shortfall penalty.
    pub nu_d: f64,
    /// Discount factor used by both learners.
    pub discount: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            nu_s: 1.0,
            nu_d: 1.0,
            discount: 0.9,
        }
    }
}

/// Path-loss model parameters. Gains follow
/// `-pl0_db - 10 * exponent * log10(d / d0)` dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossConfig {
    pub pl0_db: f64,
    pub d0: f64,
    /// Base station to user links (Rayleigh).
    pub exponent_bu: f64,
    /// Base station to IRS links (Rician).
    pub exponent_br: f64,
    /// IRS to user links (Rician).
    pub exponent_ru: f64,
    /// Rician K-factor (linear) for every IRS link.
    pub rician_k: f64,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        Self {
            pl0_db: 30.0,
            d0: 1.0,
            exponent_bu: 3.75,
            exponent_br: 2.2,
            exponent_ru: 2.2,
            rician_k: 3.0,
        }
    }
}

/// Geometry, array sizes, powers, priors and QoS targets of one deployment.
///
/// Counts are implied by the position lists: `K = su_positions.len()`,
/// `Z = irs_positions.len()` and so on. Powers are given in dBm, noise
/// variances in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    /// N_p
    pub pbs_antennas: usize,
    /// N_s
    pub sbs_antennas: usize,
    /// N_n
    pub irs_elements: usize,
    /// C
    pub subchannels: usize,
    pub pbs_position: Position,
    pub sbs_position: Position,
    pub irs_positions: Vec<Position>,
    pub pu_positions: Vec<Position>,
    pub su_positions: Vec<Position>,
    pub eve_positions: Vec<Position>,
    /// Home subchannel of every PU. Defaults to `d mod C` when empty.
    #[serde(default)]
    pub pu_subchannels: Vec<usize>,
    /// TP_s, SBS transmit power budget.
    pub sbs_max_power_dbm: f64,
    /// PBS transmit power on each subchannel.
    pub pbs_power_dbm: f64,
    pub noise_su: f64,
    pub noise_pu: f64,
    pub noise_eve: f64,
    /// Noise variance of the sensing receiver at the SBS.
    pub noise_sensing: f64,
    pub sampling_frequency_hz: f64,
    pub frame_duration_s: f64,
    pub target_detection_prob: f64,
    pub max_false_alarm_prob: f64,
    /// Pr(H_c^0) per subchannel.
    pub idle_prior: Vec<f64>,
    pub pathloss: PathLossConfig,
    /// R_d^min (bits/s/Hz).
    pub pu_min_rate: f64,
    /// R_s^{sec,min} (bits/s/Hz).
    pub su_min_secrecy: f64,
    /// Interference cap at the PUs used by the alternating-optimization
    /// baseline (watts).
    pub interference_threshold: f64,
    #[serde(default)]
    pub reward: RewardConfig,
}

impl Scenario {
    pub fn num_su(&self) -> usize {
        self.su_positions.len()
    }
    pub fn num_pu(&self) -> usize {
        self.pu_positions.len()
    }
    pub fn num_eve(&self) -> usize {
        self.eve_positions.len()
    }
    pub fn num_irs(&self) -> usize {
        self.irs_positions.len()
    }

    /// TP_s in watts.
    pub fn sbs_power_budget(&self) -> f64 {
        dbm_to_watts(self.sbs_max_power_dbm)
    }

    pub fn pbs_power(&self) -> f64 {
        dbm_to_watts(self.pbs_power_dbm)
    }

    pub fn busy_prior(&self, c: usize) -> f64 {
        1.0 - self.idle_prior[c]
    }

    /// Home subchannel of PU `d`.
    pub fn pu_subchannel(&self, d: usize) -> usize {
        if self.pu_subchannels.is_empty() {
            d % self.subchannels
        } else {
            self.pu_subchannels[d]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.version != SCENARIO_VERSION {
            return fail(format!(
                "scenario version {} is not supported (expected {SCENARIO_VERSION})",
                self.version
            ));
        }
        for (name, n) in [
            ("pbs_antennas", self.pbs_antennas),
            ("sbs_antennas", self.sbs_antennas),
            ("irs_elements", self.irs_elements),
            ("subchannels", self.subchannels),
            ("irs_positions", self.num_irs()),
            ("pu_positions", self.num_pu()),
            ("su_positions", self.num_su()),
        ] {
            if n == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.num_su() > self.subchannels {
            return fail(format!(
                "{} SUs cannot each occupy a distinct subchannel out of {}",
                self.num_su(),
                self.subchannels
            ));
        }
        if self.idle_prior.len() != self.subchannels {
            return fail(format!(
                "idle_prior has {} entries, expected one per subchannel ({})",
                self.idle_prior.len(),
                self.subchannels
            ));
        }
        if !self.pu_subchannels.is_empty() {
            if self.pu_subchannels.len() != self.num_pu() {
                return fail("pu_subchannels must list one subchannel per PU".into());
            }
            if let Some(c) = self.pu_subchannels.iter().find(|&&c| c >= self.subchannels) {
                return fail(format!("pu_subchannels entry {c} is out of range"));
            }
        }
        let open_unit = |name: &str, p: f64| -> Result<()> {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0,1), got {p}")))
            }
        };
        open_unit("target_detection_prob", self.target_detection_prob)?;
        open_unit("max_false_alarm_prob", self.max_false_alarm_prob)?;
        for &p in &self.idle_prior {
            // the always-idle prior is allowed for what-if studies
            if !(p > 0.0 && p <= 1.0) {
                return fail(format!("idle_prior entries must lie in (0,1], got {p}"));
            }
        }
        for (name, v) in [
            ("frame_duration_s", self.frame_duration_s),
            ("sampling_frequency_hz", self.sampling_frequency_hz),
            ("noise_su", self.noise_su),
            ("noise_pu", self.noise_pu),
            ("noise_eve", self.noise_eve),
            ("noise_sensing", self.noise_sensing),
            ("interference_threshold", self.interference_threshold),
            ("pathloss.d0", self.pathloss.d0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.pathloss.rician_k >= 0.0) {
            return fail("pathloss.rician_k must be non-negative".into());
        }
        if self.reward.nu_s < 0.0 || self.reward.nu_d < 0.0 {
            return fail("reward penalty coefficients must be non-negative".into());
        }
        if !(self.reward.discount > 0.0 && self.reward.discount <= 1.0) {
            return fail(format!("reward.discount must lie in (0,1], got {}", self.reward.discount));
        }
        let all_positions = std::iter::once(&self.pbs_position)
            .chain(std::iter::once(&self.sbs_position))
            .chain(&self.irs_positions)
            .chain(&self.pu_positions)
            .chain(&self.su_positions)
            .chain(&self.eve_positions);
        for p in all_positions {
            if p.iter().any(|x| !x.is_finite()) {
                return fail(format!("non-finite position {p:?}"));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario JSON: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The default deployment: 3 IRSs of 36 elements, 2 PUs, 2 SUs, 2
    /// subchannels. Eve positions are estimates placed near the IRSs the
    /// SUs would otherwise favour.
    pub fn default_preset() -> Self {
        Self::from_json_str(PRESET_DEFAULT).expect("bundled preset is valid")
    }

    /// A small deployment (2 IRSs of 4 elements, 2 SUs, 2 subchannels, one
    /// Eve) sized for laptop-scale training runs.
    pub fn tiny() -> Self {
        Self::from_json_str(PRESET_TINY).expect("bundled preset is valid")
    }

    /// Copy of `self` with a different IRS element count.
    pub fn with_irs_elements(&self, n: usize) -> Self {
        Self {
            irs_elements: n,
            ..self.clone()
        }
    }
}

pub const PRESET_DEFAULT: &str = include_str!("../../../../presets/default.json");
pub const PRESET_TINY: &str = include_str!("../../../../presets/tiny.json");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let s = Scenario::default_preset();
        assert_eq!(s.irs_elements, 36);
        assert_eq!(s.num_irs(), 3);
        assert_eq!(s.pbs_position, [300.0, 0.0, 50.0]);
        assert_eq!(s.sbs_position, [0.0, 0.0, 50.0]);
        assert_eq!(s.irs_positions, vec![[0.0, 160.0, 0.0], [150.0, 0.0, 0.0], [80.0, 80.0, 20.0]]);
        assert_eq!(s.pu_positions, vec![[270.0, 65.0, 0.0], [250.0, 10.0, 0.0]]);
        assert_eq!(s.su_positions, vec![[10.0, 150.0, 0.0], [130.0, 40.0, 0.0]]);
        assert!((s.sbs_power_budget() - 1.0).abs() < 1e-12);
        let t = Scenario::tiny();
        assert_eq!(
            (t.num_irs(), t.irs_elements, t.num_su(), t.subchannels, t.num_eve()),
            (2, 4, 2, 2, 1)
        );
    }

    #[test]
    fn rejects_unknown_key() {
        let mut v: serde_json::Value = serde_json::from_str(PRESET_TINY).unwrap();
        v["bogus_key"] = serde_json::json!(1);
        let err = Scenario::from_json_str(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("bogus_key"), "{err}");
    }

    #[test]
    fn rejects_more_sus_than_channels() {
        let mut s = Scenario::tiny();
        s.subchannels = 1;
        s.idle_prior = vec![0.8];
        assert!(s.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Scenario::tiny();
        let b = a.with_irs_elements(16);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), Scenario::tiny().fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
