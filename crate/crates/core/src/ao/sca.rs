//! Reflection coefficients by successive convex approximation.
//!
//! With beams fixed, SU `k` sees the scalar `u_k(phi) = u0 + sum_n v_n phi_n`
//! and its received power `F = |u_k|^2 = mu^2 + lambda^2`. Each outer step
//! replaces `F` by its first-order expansion `F_bar` at the current point,
//! which is a lower bound. The resulting surrogate is maximized by projected
//! gradient ascent over coefficients in the unit disk, and the expansion is
//! refreshed at the new point.

use std::f64::consts::LN_2;

use crate::env::rates::LinkView;
use crate::env::sensing::sense;
use crate::env::{AccessMode, ActionComposite, ChannelSet, ReflectionConfig, Scenario};
use crate::error::Result;
use crate::numerics::linalg::dot_t;
use crate::numerics::C64;

/// `mu^2 + lambda^2`.
pub fn sq_magnitude(mu: f64, lambda: f64) -> f64 {
    mu * mu + lambda * lambda
}

/// First-order expansion of [`sq_magnitude`] at `(mu_s, lambda_s)`,
/// evaluated at `(mu, lambda)`. Never exceeds the exact value.
pub fn taylor_lower_bound(mu_s: f64, lambda_s: f64, mu: f64, lambda: f64) -> f64 {
    mu_s * mu_s + lambda_s * lambda_s + 2.0 * mu_s * (mu - mu_s) + 2.0 * lambda_s * (lambda - lambda_s)
}

/// Expansion point of one SU's received amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogatePoint {
    pub mu: f64,
    pub lambda: f64,
    /// Received power the surrogate grants at the current iterate.
    pub kappa: f64,
}

impl SurrogatePoint {
    pub fn at(u: C64) -> Self {
        Self {
            mu: u.re,
            lambda: u.im,
            kappa: u.norm_sqr(),
        }
    }

    pub fn bound(&self, u: C64) -> f64 {
        taylor_lower_bound(self.mu, self.lambda, u.re, u.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub tolerance: f64,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            outer_iters: 20,
            inner_iters: 500,
            tolerance: 1e-6,
        }
    }
}

/// Affine scalar link `base + sum_n coef_n phi_n`.
#[derive(Debug, Clone)]
struct Link {
    base: C64,
    coef: Vec<C64>,
}

impl Link {
    fn at(&self, phi: &[C64]) -> C64 {
        self.base + self.coef.iter().zip(phi).map(|(c, p)| c * p).sum::<C64>()
    }
}

#[derive(Debug, Clone)]
struct SuModel {
    slot: usize,
    su: Link,
    /// `(weight, noise plus interference)` per branch.
    su_branches: Vec<(f64, f64)>,
    eves: Vec<(Link, Vec<f64>)>,
}

/// The reflection subproblem at fixed assignment, beams and sensing time.
#[derive(Debug, Clone)]
pub struct ReflectionModel {
    factor: f64,
    /// IRS index of every optimized slot.
    pub irs: Vec<usize>,
    sus: Vec<SuModel>,
}

impl ReflectionModel {
    pub fn new(s: &Scenario, ch: &ChannelSet, action: &ActionComposite, mode: AccessMode) -> Result<Self> {
        let view = LinkView::new(s, ch, action)?;
        let report = sense(s, ch, &action.theta, action.tau)?;
        let factor = (1.0 - action.tau / s.frame_duration_s).max(0.0);
        let mut irs: Vec<usize> = Vec::new();
        let mut sus = Vec::with_capacity(s.num_su());
        for k in 0..s.num_su() {
            let (Some(c), Some(z)) = (action.assignment.channel_of(k), action.assignment.irs_of(k)) else {
                continue;
            };
            let slot = irs.iter().position(|&v| v == z).unwrap_or_else(|| {
                irs.push(z);
                irs.len() - 1
            });
            let f = &action.beams[k];
            let m = &ch.irs[z].sbs;
            let through = |base: &crate::numerics::CVec, g: &crate::numerics::CVec| Link {
                base: dot_t(base.view(), f.view()),
                coef: (0..s.irs_elements).map(|n| g[n] * dot_t(m.row(n), f.view())).collect(),
            };
            let p = &report.per_channel[c].probs;
            let (w_idle, w_busy) = match mode {
                AccessMode::SensingEnhanced => (p.p00 + p.p10, p.p01 + p.p11),
                AccessMode::Opportunistic => (p.p00, p.p01),
            };
            let i_su = view.su_pbs_interference(k, c);
            let su_branches = vec![(w_idle, s.noise_su), (w_busy, i_su + s.noise_su)];
            let eves = (0..s.num_eve())
                .map(|e| {
                    let i_e = view.eve_pbs_interference(e, c);
                    (
                        through(&ch.eve[e].from_sbs, &ch.irs[z].to_eve[e]),
                        vec![s.noise_eve, i_e + s.noise_eve],
                    )
                })
                .collect();
            sus.push(SuModel {
                slot,
                su: through(&ch.su[k].from_sbs, &ch.irs[z].to_su[k]),
                su_branches,
                eves,
            });
        }
        Ok(Self { factor, irs, sus })
    }

    /// Current coefficients of every optimized IRS.
    pub fn coefficients(&self, theta: &ReflectionConfig) -> Vec<Vec<C64>> {
        self.irs.iter().map(|&z| theta.coefficients(z).to_vec()).collect()
    }

    /// Expansion points of every SU at `phi`.
    pub fn expand(&self, phi: &[Vec<C64>]) -> Vec<SurrogatePoint> {
        self.sus.iter().map(|m| SurrogatePoint::at(m.su.at(&phi[m.slot]))).collect()
    }

    /// Sum secrecy with the SU powers exact (`points = None`) or replaced by
    /// their lower bounds. Returns the value and its gradient with respect
    /// to the real and imaginary parts, packed as complex numbers.
    fn value_grad(&self, phi: &[Vec<C64>], points: Option<&[SurrogatePoint]>, want_grad: bool) -> (f64, Vec<Vec<C64>>) {
        let mut grad: Vec<Vec<C64>> = if want_grad {
            phi.iter().map(|p| vec![C64::new(0.0, 0.0); p.len()]).collect()
        } else {
            Vec::new()
        };
        let mut total = 0.0;
        for (i, m) in self.sus.iter().enumerate() {
            let x = &phi[m.slot];
            let u = m.su.at(x);
            // d kappa / d phi_n packed = 2 anchor conj(v_n), anchor = u or u*
            let (kappa, anchor) = match points {
                None => (u.norm_sqr(), u),
                Some(p) => (p[i].bound(u).max(0.0), C64::new(p[i].mu, p[i].lambda)),
            };
            let legit: f64 = m.su_branches.iter().map(|&(w, n)| w * (kappa / n).ln_1p()).sum::<f64>() / LN_2;
            let mut worst = (0.0, None);
            for (e, (link, noise)) in m.eves.iter().enumerate() {
                let b = link.at(x).norm_sqr();
                let r: f64 = m
                    .su_branches
                    .iter()
                    .zip(noise)
                    .map(|(&(w, _), &n)| w * (b / n).ln_1p())
                    .sum::<f64>()
                    / LN_2;
                if worst.1.is_none() || r > worst.0 {
                    worst = (r, Some((e, b)));
                }
            }
            let diff = self.factor * (legit - worst.0);
            if diff <= 0.0 {
                continue;
            }
            total += diff;
            if !want_grad {
                continue;
            }
            let g = &mut grad[m.slot];
            if kappa > 0.0 || points.is_none() {
                let dk: f64 = m.su_branches.iter().map(|&(w, n)| w / (n + kappa)).sum::<f64>() / LN_2 * self.factor;
                for (gn, v) in g.iter_mut().zip(&m.su.coef) {
                    *gn += 2.0 * dk * anchor * v.conj();
                }
            }
            if let Some((e, b)) = worst.1 {
                let (link, noise) = &m.eves[e];
                let e_amp = link.at(x);
                let db: f64 = m.su_branches.iter().zip(noise).map(|(&(w, _), &n)| w / (n + b)).sum::<f64>() / LN_2 * self.factor;
                for (gn, v) in g.iter_mut().zip(&link.coef) {
                    *gn -= 2.0 * db * e_amp * v.conj();
                }
            }
        }
        (total, grad)
    }

    /// Sum secrecy predicted at `phi` with everything but the reflection
    /// held at the model's operating point.
    pub fn objective(&self, phi: &[Vec<C64>]) -> f64 {
        self.value_grad(phi, None, false).0
    }

    /// The surrogate objective around `points`.
    pub fn surrogate(&self, phi: &[Vec<C64>], points: &[SurrogatePoint]) -> f64 {
        self.value_grad(phi, Some(points), false).0
    }

    /// Unit-modulus phases co-phasing every element's path with the direct
    /// link of the first SU using each IRS.
    pub fn aligned(&self) -> Vec<Vec<C64>> {
        let mut out: Vec<Option<Vec<C64>>> = vec![None; self.irs.len()];
        for m in &self.sus {
            if out[m.slot].is_some() {
                continue;
            }
            let target = m.su.base.arg();
            out[m.slot] = Some(
                m.su.coef
                    .iter()
                    .map(|v| {
                        if v.norm() > 0.0 {
                            C64::from_polar(1.0, target - v.arg())
                        } else {
                            C64::new(1.0, 0.0)
                        }
                    })
                    .collect(),
            );
        }
        out.into_iter().map(|v| v.unwrap_or_default()).collect()
    }

    /// Projected gradient ascent on the surrogate from `start`.
    fn inner(&self, start: &[Vec<C64>], points: &[SurrogatePoint], cfg: &ScaConfig) -> Vec<Vec<C64>> {
        let mut x = start.to_vec();
        let (mut val, mut g) = self.value_grad(&x, Some(points), true);
        let mut step = 0.0;
        for _ in 0..cfg.inner_iters {
            let gmax = g.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
            if gmax == 0.0 || !gmax.is_finite() {
                break;
            }
            if step == 0.0 {
                step = 0.5 / gmax;
            }
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<Vec<C64>> = x
                    .iter()
                    .zip(&g)
                    .map(|(xs, gs)| xs.iter().zip(gs).map(|(a, d)| project(a + d * step)).collect())
                    .collect();
                let dir: f64 = cand
                    .iter()
                    .flatten()
                    .zip(x.iter().flatten())
                    .zip(g.iter().flatten())
                    .map(|((c, a), d)| (d.conj() * (c - a)).re)
                    .sum();
                let (v, gv) = self.value_grad(&cand, Some(points), true);
                if v >= val + 1e-4 * dir && v >= val {
                    accepted = Some((cand, v, gv));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, v, gv)) = accepted else { break };
            let gain = v - val;
            x = cand;
            val = v;
            g = gv;
            step *= 2.0;
            if gain <= cfg.tolerance * val.abs().max(1.0) {
                break;
            }
        }
        x
    }

    /// Runs the outer successive approximation from `start` and returns the
    /// final point and the model objective after every accepted iteration.
    pub fn solve(&self, start: &[Vec<C64>], cfg: &ScaConfig) -> (Vec<Vec<C64>>, Vec<f64>) {
        let mut x = start.to_vec();
        let mut trace = vec![self.objective(&x)];
        for _ in 0..cfg.outer_iters {
            let points = self.expand(&x);
            let next = self.inner(&x, &points, cfg);
            let v = self.objective(&next);
            let cur = *trace.last().expect("non-empty");
            if v < cur {
                break;
            }
            x = next;
            trace.push(v);
            if v - cur <= cfg.tolerance * v.abs().max(1.0) {
                break;
            }
        }
        (x, trace)
    }
}

fn project(c: C64) -> C64 {
    let r = c.norm();
    if r > 1.0 {
        c / r
    } else {
        c
    }
}

/// Optimizes the reflection of every paired IRS, starting from the better
/// of the current coefficients and the co-phased ones. Unpaired IRSs are
/// left untouched.
pub fn sca_reflection(
    s: &Scenario,
    ch: &ChannelSet,
    action: &ActionComposite,
    mode: AccessMode,
    cfg: &ScaConfig,
) -> Result<ReflectionConfig> {
    let model = ReflectionModel::new(s, ch, action, mode)?;
    let init = model.coefficients(&action.theta);
    let aligned = model.aligned();
    let start = if model.objective(&aligned) > model.objective(&init) {
        aligned
    } else {
        init
    };
    let (phi, _) = model.solve(&start, cfg);
    let mut theta = action.theta.clone();
    for (slot, &z) in model.irs.iter().enumerate() {
        theta.set_coefficients(z, &phi[slot]);
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{draw_channels, mdp::initial_action};
    use crate::numerics::SeededRng;

    #[test]
    fn taylor_bound_touches_and_stays_below() {
        let mut rng = SeededRng::new(4);
        for _ in 0..200 {
            let (a, b, c, d) = (rng.normal(), rng.normal(), rng.normal(), rng.normal());
            assert!(taylor_lower_bound(a, b, c, d) <= sq_magnitude(c, d) + 1e-12);
            assert!((taylor_lower_bound(a, b, a, b) - sq_magnitude(a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let s = Scenario::tiny();
        let mut rng = SeededRng::new(8);
        let ch = draw_channels(&s, &mut rng).unwrap();
        let a = initial_action(&s, &mut rng);
        let m = ReflectionModel::new(&s, &ch, &a, AccessMode::SensingEnhanced).unwrap();
        let x: Vec<Vec<C64>> = m
            .irs
            .iter()
            .map(|_| {
                (0..s.irs_elements)
                    .map(|_| C64::from_polar(0.7, rng.uniform_in(0.0, std::f64::consts::TAU)))
                    .collect()
            })
            .collect();
        let pts = m.expand(&m.aligned());
        for points in [None, Some(pts.as_slice())] {
            let (v, g) = m.value_grad(&x, points, true);
            assert!(v > 0.0);
            let h = 1e-7;
            for slot in 0..x.len() {
                for n in 0..s.irs_elements {
                    for (dir, part) in [(C64::new(h, 0.0), g[slot][n].re), (C64::new(0.0, h), g[slot][n].im)] {
                        let mut up = x.clone();
                        up[slot][n] += dir;
                        let mut dn = x.clone();
                        dn[slot][n] -= dir;
                        let fd = (m.value_grad(&up, points, false).0 - m.value_grad(&dn, points, false).0) / (2.0 * h);
                        assert!((fd - part).abs() <= 1e-4 * fd.abs().max(part.abs()).max(1e-3), "{fd} vs {part}");
                    }
                }
            }
        }
    }

    #[test]
    fn surrogate_is_a_minorizer_and_solve_is_monotone() {
        let s = Scenario::tiny();
        let mut rng = SeededRng::new(3);
        let ch = draw_channels(&s, &mut rng).unwrap();
        let a = initial_action(&s, &mut rng);
        let m = ReflectionModel::new(&s, &ch, &a, AccessMode::SensingEnhanced).unwrap();
        let x0 = m.coefficients(&a.theta);
        let pts = m.expand(&x0);
        assert!((m.surrogate(&x0, &pts) - m.objective(&x0)).abs() < 1e-12);
        let x1 = m.aligned();
        assert!(m.surrogate(&x1, &pts) <= m.objective(&x1) + 1e-12);
        let (_, trace) = m.solve(&x0, &ScaConfig::default());
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
    }
}
