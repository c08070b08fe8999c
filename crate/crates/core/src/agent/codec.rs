//! Mapping between the continuous action box `[-1, 1]^dim` and
//! [`ActionComposite`].
//!
//! Layout of the vector:
//!
//! | block | length |
//! |---|---|
//! | per SU `k`: amplitudes of its paired IRS, as `2b - 1` | `N_n` |
//! | per SU `k`: phases of its paired IRS, as `phi / pi - 1` | `N_n` |
//! | per SU `k`: beam, real parts then imaginary parts, over `sqrt(TP_s / (K N_s))` | `2 N_s` |
//! | sensing time, affine onto `[0.01 T, 0.99 T]` | `1` |
//!
//! The two reflection slots of every SU come first (`2 N_n K` entries), then
//! all beams (`2 N_s K`), then `tau`. When several SUs share an IRS, the
//! lowest-index SU's slot configures it. IRSs nobody is paired with stay at
//! identity. Beams are projected radially onto the power ball.

use std::f64::consts::PI;

use super::options::OptionEntry;
use crate::env::action::wrap_phase;
use crate::env::{ActionComposite, Assignment, ReflectionConfig, Scenario};
use crate::error::{dims, Result};
use crate::numerics::{CVec, C64};

/// How the decoded reflection is overridden by a benchmark scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReflectionOverride {
    #[default]
    None,
    /// Every element absorbs: the IRSs play no part.
    Absorbing,
    /// Every element at `b = 1, phi = 0`.
    Identity,
}

pub fn action_dim(s: &Scenario) -> usize {
    let k = s.num_su();
    2 * s.irs_elements * k + 2 * s.sbs_antennas * k + 1
}

fn beam_scale(s: &Scenario) -> f64 {
    (s.sbs_power_budget() / (s.num_su() * s.sbs_antennas) as f64).sqrt()
}

const TAU_LO: f64 = 0.01;
const TAU_SPAN: f64 = 0.98;

pub fn decode_action(s: &Scenario, option: &OptionEntry, x: &[f64], reflection: ReflectionOverride) -> Result<ActionComposite> {
    if x.len() != action_dim(s) {
        return Err(dims(action_dim(s), x.len()));
    }
    let (k_n, nn, ns) = (s.num_su(), s.irs_elements, s.sbs_antennas);
    let clip = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    let mut theta = ReflectionConfig::identity(s.num_irs(), nn);
    let mut set = vec![false; s.num_irs()];
    for k in 0..k_n {
        let z = option.irs[k];
        if set[z] {
            continue;
        }
        set[z] = true;
        let base = 2 * nn * k;
        for n in 0..nn {
            theta.amplitudes[z][n] = (clip(x[base + n]) + 1.0) / 2.0;
            theta.phases[z][n] = wrap_phase(PI * (clip(x[base + nn + n]) + 1.0));
        }
    }
    match reflection {
        ReflectionOverride::None => {}
        ReflectionOverride::Absorbing => theta = ReflectionConfig::absorbing(s.num_irs(), nn),
        ReflectionOverride::Identity => theta = ReflectionConfig::identity(s.num_irs(), nn),
    }
    let scale = beam_scale(s);
    let off = 2 * nn * k_n;
    let mut beams: Vec<CVec> = (0..k_n)
        .map(|k| {
            let b = off + 2 * ns * k;
            (0..ns).map(|i| C64::new(clip(x[b + i]), clip(x[b + ns + i])) * scale).collect()
        })
        .collect();
    crate::env::action::project_beams(&mut beams, s.sbs_power_budget());
    let t = s.frame_duration_s;
    let tau = t * (TAU_LO + (clip(x[x.len() - 1]) + 1.0) / 2.0 * TAU_SPAN);
    let assignment = Assignment::from_maps(&option.channels, &option.irs, s.subchannels, s.num_irs())?;
    Ok(ActionComposite {
        assignment,
        theta,
        beams,
        tau,
    })
}

/// Inverse of [`decode_action`] for actions whose image lies in the box.
/// Entries outside `[-1, 1]` are returned unclipped.
pub fn encode_action(s: &Scenario, option: &OptionEntry, a: &ActionComposite) -> Vec<f64> {
    let k_n = s.num_su();
    let mut x = Vec::with_capacity(action_dim(s));
    for k in 0..k_n {
        let z = option.irs[k];
        x.extend(a.theta.amplitudes[z].iter().map(|b| 2.0 * b - 1.0));
        x.extend(a.theta.phases[z].iter().map(|p| p / PI - 1.0));
    }
    let scale = beam_scale(s);
    for f in &a.beams {
        x.extend(f.iter().map(|z| z.re / scale));
        x.extend(f.iter().map(|z| z.im / scale));
    }
    x.push((a.tau / s.frame_duration_s - TAU_LO) / TAU_SPAN * 2.0 - 1.0);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::options::OptionCatalog;
    use crate::numerics::SeededRng;

    #[test]
    fn zero_vector_midpoint() {
        let s = Scenario::tiny();
        let cat = OptionCatalog::build(&s).unwrap();
        let a = decode_action(&s, cat.entry(1), &vec![0.0; action_dim(&s)], ReflectionOverride::None).unwrap();
        assert!((a.tau - s.frame_duration_s / 2.0).abs() < 1e-15);
        for z in 0..2 {
            assert!(a.theta.amplitudes[z].iter().all(|&b| b == 0.5));
            assert!(a.theta.phases[z].iter().all(|&p| (p - PI).abs() < 1e-15));
        }
        assert_eq!(a.beam_power(), 0.0);
    }

    #[test]
    fn unpaired_irs_identity_and_shared_irs_lowest_su() {
        let s = Scenario::tiny();
        let cat = OptionCatalog::build(&s).unwrap();
        let e = cat.entries().iter().find(|e| e.irs == vec![1, 1]).unwrap();
        let mut x = vec![0.0; action_dim(&s)];
        let nn = s.irs_elements;
        x[..nn].fill(1.0);
        x[2 * nn..3 * nn].fill(-1.0);
        let a = decode_action(&s, e, &x, ReflectionOverride::None).unwrap();
        assert_eq!(a.theta.amplitudes[0], vec![1.0; nn]);
        assert_eq!(a.theta.phases[0], vec![0.0; nn]);
        assert_eq!(a.theta.amplitudes[1], vec![1.0; nn]);
    }

    #[test]
    fn round_trip() {
        let s = Scenario::tiny();
        let cat = OptionCatalog::build(&s).unwrap();
        let mut rng = SeededRng::new(9);
        for i in 0..cat.len() {
            let e = cat.entry(i);
            let x: Vec<f64> = (0..action_dim(&s)).map(|_| rng.uniform_in(-0.4, 0.4)).collect();
            let a = decode_action(&s, e, &x, ReflectionOverride::None).unwrap();
            let back = decode_action(&s, e, &encode_action(&s, e, &a), ReflectionOverride::None).unwrap();
            assert_eq!(a.assignment, back.assignment);
            assert!((a.tau - back.tau).abs() < 1e-12);
            for (f, g) in a.beams.iter().zip(&back.beams) {
                for (u, v) in f.iter().zip(g) {
                    assert!((u - v).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn overrides() {
        let s = Scenario::tiny();
        let cat = OptionCatalog::build(&s).unwrap();
        let x = vec![0.3; action_dim(&s)];
        let a = decode_action(&s, cat.entry(0), &x, ReflectionOverride::Absorbing).unwrap();
        assert!(a.theta.amplitudes.iter().flatten().all(|&b| b == 0.0));
        let a = decode_action(&s, cat.entry(0), &x, ReflectionOverride::Identity).unwrap();
        assert_eq!(a.theta, ReflectionConfig::identity(2, s.irs_elements));
    }
}
