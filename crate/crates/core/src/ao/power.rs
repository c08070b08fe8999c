//! Transmit power from the stationarity conditions of the beamforming and
//! assignment subproblem, and the dual variables that price its constraints.

use std::f64::consts::LN_2;

/// One actual-activity branch of a secrecy term:
/// `weight [log2(1 + a x) - log2(1 + b x)]`, where `a` and `b` are the SU's
/// and the strongest Eve's gain per watt over their noise plus interference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub a: f64,
    pub b: f64,
}

impl Branch {
    pub fn rate(&self, x: f64) -> f64 {
        self.weight * ((self.a * x).ln_1p() - (self.b * x).ln_1p()) / LN_2
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.weight / LN_2 * (self.a / (1.0 + self.a * x) - self.b / (1.0 + self.b * x))
    }

    /// `x` times the slope: the marginal term of the subchannel indicator.
    pub fn marginal(&self, x: f64) -> f64 {
        self.weight / LN_2 * (self.a * x / (1.0 + self.a * x) - self.b * x / (1.0 + self.b * x))
    }
}

/// Unclamped secrecy rate of one SU on one subchannel as a function of its
/// transmit power `x`: `factor * sum_j branch_j(x)` with `factor = 1 - tau/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyTerm {
    pub factor: f64,
    pub branches: Vec<Branch>,
}

impl SecrecyTerm {
    pub fn value(&self, x: f64) -> f64 {
        self.factor * self.branches.iter().map(|b| b.rate(x)).sum::<f64>()
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.factor * self.branches.iter().map(|b| b.slope(x)).sum::<f64>()
    }

    /// Per-term Lagrangian `value(x) - price x`.
    pub fn lagrangian(&self, x: f64, price: f64) -> f64 {
        self.value(x) - price * x
    }

    /// Subchannel indicator `H_{k,c}`: the Lagrangian's partial derivative in
    /// the assignment variable once the power is at its stationary value,
    /// `factor * sum_j w_j (r_j(x) - x r_j'(x))`.
    pub fn indicator(&self, x: f64) -> f64 {
        self.factor * self.branches.iter().map(|b| b.rate(x) - b.marginal(x)).sum::<f64>()
    }
}

/// Maximizer over `x >= 0` of `w [log2(1 + a x) - log2(1 + b x)] - price x`.
///
/// Stationarity gives `price a b x^2 + price (a + b) x + price - w (a - b) / ln 2 = 0`.
/// Both roots are clamped at zero and the one with the larger Lagrangian is
/// kept. With `a b = 0` the equation is linear and the root is the
/// water-filling level `w / (price ln 2) - 1 / a`. A negative discriminant
/// gives 0. With `price = 0` and `a > b` the term grows without bound and
/// the result is infinite.
pub fn power_quadratic(w: f64, a: f64, b: f64, price: f64) -> f64 {
    if w <= 0.0 || a <= b {
        return 0.0;
    }
    if price <= 0.0 {
        return f64::INFINITY;
    }
    let qa = price * a * b;
    let qb = price * (a + b);
    let qc = price - w * (a - b) / LN_2;
    if qa == 0.0 {
        return (-qc / qb).max(0.0);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return 0.0;
    }
    // cancellation-free pair of roots
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let roots = [(q / qa).max(0.0), if q != 0.0 { (qc / q).max(0.0) } else { 0.0 }];
    let br = Branch { weight: w, a, b };
    let lag = |x: f64| br.rate(x) - price * x;
    if lag(roots[1]) > lag(roots[0]) {
        roots[1]
    } else {
        roots[0]
    }
}

/// Maximizer of [`SecrecyTerm::lagrangian`] over `[0, cap]`.
///
/// The candidates are the interval ends, each branch's closed-form root
/// taken at its share of the price, and every stationary point bracketed
/// on a logarithmic grid and refined by bisection on the slope.
pub fn optimal_power(term: &SecrecyTerm, price: f64, cap: f64) -> f64 {
    if cap <= 0.0 || term.factor <= 0.0 {
        return 0.0;
    }
    let mut cands = vec![0.0, cap];
    let total_w: f64 = term.branches.iter().map(|b| b.weight).sum();
    if total_w > 0.0 {
        for b in &term.branches {
            let share = price * b.weight / total_w / term.factor;
            let x = power_quadratic(b.weight, b.a, b.b, share);
            cands.push(x.min(cap));
        }
    }
    let slope = |x: f64| term.slope(x) - price;
    const GRID: usize = 96;
    let mut prev = (0.0, slope(0.0));
    for i in 0..=GRID {
        let x = cap * 10f64.powf(-12.0 * (1.0 - i as f64 / GRID as f64));
        let g = slope(x);
        if prev.1 > 0.0 && g <= 0.0 {
            let (mut lo, mut hi) = (prev.0, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cands.push(if slope(lo).abs() < slope(hi).abs() { lo } else { hi });
        }
        prev = (x, g);
    }
    let mut best = (0.0, term.lagrangian(0.0, price));
    for x in cands {
        let v = term.lagrangian(x, price);
        if v > best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// Multipliers of the beamforming and assignment subproblem. The interference
/// and power constraints enter normalized by their thresholds, so `omega` and
/// `varsigma` are prices in bits per unit of relative load.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVars {
    /// Interference cap, one per subchannel.
    pub omega: Vec<f64>,
    /// Power budget.
    pub varsigma: f64,
    /// Assignment simplex, one per subchannel: the indicator value of the
    /// winning SU.
    pub nu: Vec<f64>,
}

impl DualVars {
    pub fn zeros(subchannels: usize) -> Self {
        Self {
            omega: vec![0.0; subchannels],
            varsigma: 0.0,
            nu: vec![0.0; subchannels],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.varsigma >= 0.0 && self.omega.iter().all(|&w| w >= 0.0)
    }

    /// Projected subgradient step. `interference[c]` and `power` are loads
    /// relative to their caps, so a load of 1 is a zero slack.
    pub fn update(&mut self, interference: &[f64], power: f64, step: f64) {
        for (w, load) in self.omega.iter_mut().zip(interference) {
            *w = (*w + step * (load - 1.0)).max(0.0);
        }
        self.varsigma = (self.varsigma + step * (power - 1.0)).max(0.0);
    }
}

/// Diminishing step `s0 / sqrt(t)` for `t >= 1`.
pub fn dual_step(s0: f64, t: usize) -> f64 {
    s0 / (t.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(w: f64, a: f64, b: f64) -> SecrecyTerm {
        SecrecyTerm {
            factor: 1.0,
            branches: vec![Branch { weight: w, a, b }],
        }
    }

    #[test]
    fn weak_legit_link_gets_nothing() {
        assert_eq!(power_quadratic(1.0, 2.0, 3.0, 0.5), 0.0);
        assert_eq!(power_quadratic(1.0, 2.0, 2.0, 0.0), 0.0);
    }

    #[test]
    fn closed_form_is_stationary() {
        for &(w, a, b, p) in &[(0.8, 5.0, 1.0, 0.3), (1.0, 100.0, 3.0, 2.0), (0.2, 40.0, 0.0, 0.05)] {
            let x = power_quadratic(w, a, b, p);
            assert!(x > 0.0);
            let br = Branch { weight: w, a, b };
            let h = 1e-6 * x;
            let d = (br.rate(x + h) - br.rate(x - h)) / (2.0 * h) - p;
            assert!(d.abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn water_filling_level() {
        let x = power_quadratic(1.0, 4.0, 0.0, 0.5);
        assert!((x - (1.0 / (0.5 * LN_2) - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn unpriced_power_hits_cap() {
        assert_eq!(power_quadratic(1.0, 3.0, 0.0, 0.0), f64::INFINITY);
        assert_eq!(optimal_power(&one(1.0, 3.0, 0.0), 0.0, 2.5), 2.5);
    }

    #[test]
    fn optimal_power_beats_a_fine_grid() {
        let t = SecrecyTerm {
            factor: 0.9,
            branches: vec![
                Branch {
                    weight: 0.7,
                    a: 50.0,
                    b: 4.0,
                },
                Branch {
                    weight: 0.3,
                    a: 5.0,
                    b: 2.0,
                },
            ],
        };
        let x = optimal_power(&t, 0.8, 10.0);
        let best = (0..=100_000).map(|i| t.lagrangian(i as f64 * 1e-4, 0.8)).fold(f64::MIN, f64::max);
        assert!(t.lagrangian(x, 0.8) >= best - 1e-9);
        if x > 0.0 && x < 10.0 {
            assert!((t.slope(x) - 0.8).abs() < 1e-6);
        }
    }

    #[test]
    fn duals_stay_non_negative() {
        let mut d = DualVars::zeros(2);
        d.update(&[0.2, 3.0], 0.5, 1.0);
        assert_eq!(d.omega, vec![0.0, 2.0]);
        assert_eq!(d.varsigma, 0.0);
        let before = d.clone();
        d.update(&[1.0, 1.0], 1.0, 0.7);
        assert_eq!(d, before);
        assert!(d.is_valid());
        assert!((dual_step(0.1, 4) - 0.05).abs() < 1e-15);
    }
}
