//! One block-fading realization of every link in the network.

use ndarray::{Array1, Array2};

use super::scenario::{Position, Scenario};
use crate::error::Result;
use crate::numerics::linalg::{norm_sq, ula_steering};
use crate::numerics::{path_gain, rayleigh_channel, rician_channel, CMat, CVec, SeededRng, C64};

/// Links touching IRS `z`. Vectors toward single-antenna users have
/// `N_n` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsLinks {
    /// `H_z`, PBS to IRS, `N_n x N_p`.
    pub from_pbs: CMat,
    /// SBS to IRS, `N_n x N_s`. By reciprocity this one matrix serves both as
    /// `G_z` (transmission) and `g_{z,s}` (sensing echo toward the SBS).
    pub sbs: CMat,
    /// `g_{z,k}`
    pub to_su: Vec<CVec>,
    /// `g_{z,m}`
    pub to_eve: Vec<CVec>,
    /// `g_{z,d}`
    pub to_pu: Vec<CVec>,
}

/// Direct base-station links of one single-antenna user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLinks {
    /// `h_{s,.}`, length `N_s`.
    pub from_sbs: CVec,
    /// `h_{p,.}`, length `N_p`.
    pub from_pbs: CVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `h_{p,s}`, PBS to SBS, `N_p x N_s`.
    pub pbs_to_sbs: CMat,
    pub irs: Vec<IrsLinks>,
    pub su: Vec<UserLinks>,
    pub eve: Vec<UserLinks>,
    pub pu: Vec<UserLinks>,
    /// `f^p_{d,c}`: maximum-ratio beam toward PU `d`, identical on every
    /// subchannel.
    pub pbs_beams: Vec<CVec>,
    /// `delta_{d,c}`, `D x C`, at most one active PU per subchannel.
    pub occupancy: Array2<u8>,
}

impl ChannelSet {
    /// PU transmitting on subchannel `c`, if any.
    pub fn occupant(&self, c: usize) -> Option<usize> {
        self.occupancy.column(c).iter().position(|&x| x == 1)
    }

    /// `alpha_c`: PBS transmit power on `c` over the sensing noise, or 0 when
    /// the subchannel is idle.
    pub fn sensing_alpha(&self, c: usize, noise_sensing: f64) -> f64 {
        match self.occupant(c) {
            Some(d) => norm_sq(self.pbs_beams[d].view()) / noise_sensing,
            None => 0.0,
        }
    }
}

fn distance(a: &Position, b: &Position) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Direction cosine of `to - from` against the x axis (array orientation).
fn direction_cos(from: &Position, to: &Position) -> f64 {
    let d = distance(from, to);
    if d == 0.0 {
        0.0
    } else {
        (to[0] - from[0]) / d
    }
}

struct Drawer<'a> {
    s: &'a Scenario,
    rng: SeededRng,
}

impl Drawer<'_> {
    fn gain(&self, a: &Position, b: &Position, exponent: f64) -> Result<f64> {
        let pl = &self.s.pathloss;
        path_gain(distance(a, b).max(pl.d0), exponent, pl.pl0_db, pl.d0)
    }

    /// Rayleigh link to a single-antenna user from an `n`-antenna station.
    fn direct(&mut self, bs: &Position, user: &Position, n: usize) -> Result<CVec> {
        let g = self.gain(bs, user, self.s.pathloss.exponent_bu)?;
        Ok(rayleigh_channel(&mut self.rng, n, 1, g)?.column(0).to_owned())
    }

    /// Rician link between two arrays; `rx x tx`.
    fn array_link(&mut self, tx: &Position, n_tx: usize, rx: &Position, n_rx: usize, exponent: f64) -> Result<CMat> {
        let g = self.gain(tx, rx, exponent)?;
        let a_rx = ula_steering(n_rx, direction_cos(rx, tx));
        let a_tx = ula_steering(n_tx, direction_cos(tx, rx));
        let los = Array2::from_shape_fn((n_rx, n_tx), |(i, j)| a_rx[i] * a_tx[j]);
        rician_channel(&mut self.rng, n_rx, n_tx, g, self.s.pathloss.rician_k, &los)
    }

    /// Rician link from an IRS to a single-antenna user.
    fn irs_to_user(&mut self, irs: &Position, user: &Position) -> Result<CVec> {
        let n = self.s.irs_elements;
        let m = self.array_link(irs, n, user, 1, self.s.pathloss.exponent_ru)?;
        Ok(m.row(0).to_owned())
    }
}

/// Draws a full channel realization.
///
/// Direct base-station-to-user links are Rayleigh; every link with an IRS
/// endpoint, and the PBS-to-SBS sensing link, is Rician with a ULA
/// line-of-sight component derived from the geometry. PU occupancy is drawn
/// per subchannel from the idle prior.
pub fn draw_channels(s: &Scenario, rng: &mut SeededRng) -> Result<ChannelSet> {
    let mut d = Drawer { s, rng: rng.fork() };
    let (np, ns, nn) = (s.pbs_antennas, s.sbs_antennas, s.irs_elements);
    let pl = s.pathloss.clone();

    // rx x tx with the PBS as "receiver" gives the N_p x N_s layout directly
    let pbs_to_sbs = d.array_link(&s.sbs_position, ns, &s.pbs_position, np, pl.exponent_bu)?;

    let mut irs = Vec::with_capacity(s.num_irs());
    for p in &s.irs_positions {
        let from_pbs = d.array_link(&s.pbs_position, np, p, nn, pl.exponent_br)?;
        let sbs = d.array_link(&s.sbs_position, ns, p, nn, pl.exponent_br)?;
        let to_su = s.su_positions.iter().map(|u| d.irs_to_user(p, u)).collect::<Result<_>>()?;
        let to_eve = s.eve_positions.iter().map(|u| d.irs_to_user(p, u)).collect::<Result<_>>()?;
        let to_pu = s.pu_positions.iter().map(|u| d.irs_to_user(p, u)).collect::<Result<_>>()?;
        irs.push(IrsLinks {
            from_pbs,
            sbs,
            to_su,
            to_eve,
            to_pu,
        });
    }

    let mut users = |positions: &[Position]| -> Result<Vec<UserLinks>> {
        positions
            .iter()
            .map(|u| {
                Ok(UserLinks {
                    from_sbs: d.direct(&s.sbs_position, u, ns)?,
                    from_pbs: d.direct(&s.pbs_position, u, np)?,
                })
            })
            .collect()
    };
    let su = users(&s.su_positions)?;
    let eve = users(&s.eve_positions)?;
    let pu = users(&s.pu_positions)?;

    let amp = s.pbs_power().sqrt();
    let pbs_beams = pu
        .iter()
        .map(|l| {
            let n = norm_sq(l.from_pbs.view()).sqrt();
            if n > 0.0 {
                l.from_pbs.mapv(|h| h.conj() * (amp / n))
            } else {
                Array1::from_elem(np, C64::new(amp / (np as f64).sqrt(), 0.0))
            }
        })
        .collect();

    let mut occupancy = Array2::zeros((s.num_pu(), s.subchannels));
    for c in 0..s.subchannels {
        if d.rng.bernoulli(s.busy_prior(c)) {
            let homed: Vec<usize> = (0..s.num_pu()).filter(|&u| s.pu_subchannel(u) == c).collect();
            let pu = if homed.is_empty() {
                d.rng.below(s.num_pu())
            } else {
                homed[d.rng.below(homed.len())]
            };
            occupancy[[pu, c]] = 1;
        }
    }

    Ok(ChannelSet {
        pbs_to_sbs,
        irs,
        su,
        eve,
        pu,
        pbs_beams,
        occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::all_finite;

    #[test]
    fn default_dims() {
        let s = Scenario::default_preset();
        let ch = draw_channels(&s, &mut SeededRng::new(1)).unwrap();
        assert_eq!(ch.irs[0].from_pbs.dim(), (36, s.pbs_antennas));
        assert_eq!(ch.irs[2].sbs.dim(), (36, s.sbs_antennas));
        assert_eq!(ch.irs[1].to_su[0].len(), 36);
        assert_eq!(ch.pbs_to_sbs.dim(), (s.pbs_antennas, s.sbs_antennas));
        assert_eq!(ch.su[1].from_sbs.len(), s.sbs_antennas);
        assert_eq!(ch.occupancy.dim(), (s.num_pu(), s.subchannels));
        assert!(all_finite(ch.irs[0].from_pbs.view()));
        for c in 0..s.subchannels {
            assert!(ch.occupancy.column(c).sum() <= 1);
        }
    }

    #[test]
    fn deterministic() {
        let s = Scenario::tiny();
        let a = draw_channels(&s, &mut SeededRng::new(9)).unwrap();
        let b = draw_channels(&s, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn always_idle_prior() {
        let mut s = Scenario::tiny();
        s.idle_prior = vec![1.0; s.subchannels];
        for seed in 0..20 {
            let ch = draw_channels(&s, &mut SeededRng::new(seed)).unwrap();
            assert!(ch.occupancy.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn pbs_beam_has_fixed_power() {
        let s = Scenario::tiny();
        let ch = draw_channels(&s, &mut SeededRng::new(2)).unwrap();
        for f in &ch.pbs_beams {
            assert!((norm_sq(f.view()) - s.pbs_power()).abs() < 1e-9 * s.pbs_power());
        }
    }
}
