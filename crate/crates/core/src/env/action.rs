//! Decision variables: subchannel assignment, IRS pairing, reflection
//! coefficients, SBS beams and sensing time.

use std::f64::consts::TAU;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::numerics::{CVec, C64};

/// Maps an angle onto `[0, 2pi)`, guarding against `rem_euclid` rounding up
/// to exactly `2pi`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Per-IRS amplitudes `b in [0,1]` and phases `phi in [0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionConfig {
    pub amplitudes: Vec<Vec<f64>>,
    pub phases: Vec<Vec<f64>>,
}

impl ReflectionConfig {
    /// `b = 1, phi = 0` on every element.
    pub fn identity(num_irs: usize, elements: usize) -> Self {
        Self {
            amplitudes: vec![vec![1.0; elements]; num_irs],
            phases: vec![vec![0.0; elements]; num_irs],
        }
    }

    /// Every element absorbs (`b = 0`).
    pub fn absorbing(num_irs: usize, elements: usize) -> Self {
        Self {
            amplitudes: vec![vec![0.0; elements]; num_irs],
            phases: vec![vec![0.0; elements]; num_irs],
        }
    }

    pub fn num_irs(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn elements(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    /// Diagonal of `Phi_z`.
    pub fn coefficients(&self, z: usize) -> CVec {
        self.amplitudes[z]
            .iter()
            .zip(&self.phases[z])
            .map(|(&b, &p)| C64::from_polar(b, p))
            .collect()
    }

    /// Sets IRS `z` from complex coefficients inside the unit disk.
    pub fn set_coefficients(&mut self, z: usize, coeffs: &[C64]) {
        for (n, c) in coeffs.iter().enumerate() {
            self.amplitudes[z][n] = c.norm().min(1.0);
            self.phases[z][n] = wrap_phase(c.arg());
        }
    }

    /// Minimum of `b`, `1-b`, `phi` and `2pi-phi` over all elements. The
    /// configuration satisfies the amplitude and phase bounds iff this is
    /// non-negative and [`Self::phases_half_open`] holds.
    pub fn bound_slack(&self) -> f64 {
        let mut slack = f64::INFINITY;
        for (bs, ps) in self.amplitudes.iter().zip(&self.phases) {
            for (&b, &p) in bs.iter().zip(ps) {
                slack = slack.min(b).min(1.0 - b).min(p).min(TAU - p);
            }
        }
        slack
    }

    pub fn phases_half_open(&self) -> bool {
        self.phases.iter().flatten().all(|&p| (0.0..TAU).contains(&p))
    }

    /// `min 1 - |b e^{j phi}|`.
    pub fn modulus_slack(&self) -> f64 {
        self.amplitudes
            .iter()
            .flatten()
            .map(|&b| 1.0 - b.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Binary subchannel assignment `xi` (K x C) and IRS pairing `zeta` (K x Z).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub xi: Array2<u8>,
    pub zeta: Array2<u8>,
}

impl Assignment {
    /// Builds the indicator matrices from per-SU subchannel and IRS indices.
    pub fn from_maps(channels: &[usize], irs: &[usize], num_channels: usize, num_irs: usize) -> Result<Self> {
        if channels.len() != irs.len() {
            return Err(invalid("channel and IRS maps must have one entry per SU"));
        }
        let k = channels.len();
        let mut xi = Array2::zeros((k, num_channels));
        let mut zeta = Array2::zeros((k, num_irs));
        for (u, (&c, &z)) in channels.iter().zip(irs).enumerate() {
            if c >= num_channels || z >= num_irs {
                return Err(invalid(format!("SU {u}: subchannel {c} or IRS {z} out of range")));
            }
            xi[[u, c]] = 1;
            zeta[[u, z]] = 1;
        }
        Ok(Self { xi, zeta })
    }

    pub fn num_su(&self) -> usize {
        self.xi.nrows()
    }

    pub fn channel_of(&self, k: usize) -> Option<usize> {
        let row = self.xi.row(k);
        if row.sum() != 1 {
            return None;
        }
        row.iter().position(|&x| x == 1)
    }

    pub fn irs_of(&self, k: usize) -> Option<usize> {
        let row = self.zeta.row(k);
        if row.sum() != 1 {
            return None;
        }
        row.iter().position(|&x| x == 1)
    }

    /// SU occupying subchannel `c`, if any.
    pub fn user_on(&self, c: usize) -> Option<usize> {
        self.xi.column(c).iter().position(|&x| x == 1)
    }

    /// Each SU holds exactly one subchannel and no subchannel is shared
    /// (every subchannel is used when `K = C`).
    pub fn c6_valid(&self) -> bool {
        let (k, c) = self.xi.dim();
        let binary = self.xi.iter().all(|&x| x <= 1);
        let rows = self.xi.rows().into_iter().all(|r| r.sum() == 1);
        let cols = self.xi.columns().into_iter().all(|col| {
            let s = col.sum();
            if k == c {
                s == 1
            } else {
                s <= 1
            }
        });
        binary && rows && cols
    }

    /// Each SU is paired with exactly one IRS.
    pub fn c7_valid(&self) -> bool {
        self.zeta.iter().all(|&x| x <= 1) && self.zeta.rows().into_iter().all(|r| r.sum() == 1)
    }
}

/// A complete decision for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionComposite {
    pub assignment: Assignment,
    pub theta: ReflectionConfig,
    /// SBS beam of SU `k` on its assigned subchannel, length `N_s`.
    pub beams: Vec<CVec>,
    /// Sensing time in seconds.
    pub tau: f64,
}

impl ActionComposite {
    /// `sum_k ||f_k||^2`.
    pub fn beam_power(&self) -> f64 {
        self.beams.iter().map(|f| f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    /// Radially scales the beam block so its total power does not exceed
    /// `budget`. The target sits a hair inside the boundary so rounding
    /// never pushes the result outside.
    pub fn project_beams(&mut self, budget: f64) {
        project_beams(&mut self.beams, budget);
    }
}

pub fn project_beams(beams: &mut [CVec], budget: f64) {
    let power: f64 = beams.iter().map(|f| f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
    if power > budget {
        let scale = (budget * (1.0 - 1e-12) / power).sqrt();
        for f in beams.iter_mut() {
            f.mapv_inplace(|z| z * scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn wrap_phase_half_open() {
        assert_eq!(wrap_phase(TAU), 0.0);
        assert_eq!(wrap_phase(-1e-18), 0.0);
        assert!((wrap_phase(-1.0) - (TAU - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn assignment_validity() {
        let a = Assignment::from_maps(&[1, 0], &[2, 2], 2, 3).unwrap();
        assert!(a.c6_valid() && a.c7_valid());
        assert_eq!(a.channel_of(0), Some(1));
        assert_eq!(a.user_on(0), Some(1));
        let clash = Assignment::from_maps(&[0, 0], &[0, 1], 2, 2).unwrap();
        assert!(!clash.c6_valid());
        let mut none = a.clone();
        none.zeta[[0, 2]] = 0;
        assert!(!none.c7_valid());
        assert_eq!(none.irs_of(0), None);
    }

    #[test]
    fn projection_respects_budget() {
        let mut beams = vec![Array1::from_elem(3, C64::new(2.0, -1.0)); 2];
        project_beams(&mut beams, 1.0);
        let p: f64 = beams.iter().flatten().map(|z| z.norm_sqr()).sum();
        assert!(p <= 1.0 && p > 1.0 - 1e-9);
    }

    #[test]
    fn coefficients_round_trip() {
        let mut theta = ReflectionConfig::identity(1, 3);
        let c = [C64::from_polar(0.5, 1.0), C64::from_polar(1.0, -2.0), C64::new(0.0, 0.0)];
        theta.set_coefficients(0, &c);
        for (a, b) in theta.coefficients(0).iter().zip(&c) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(theta.bound_slack() >= 0.0 && theta.phases_half_open());
    }
}
