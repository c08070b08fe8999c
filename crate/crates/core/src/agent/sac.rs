//! Soft actor-critic over the continuous action box, conditioned on the
//! chosen option.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};

use super::mlp::{Adam, Grads, Mlp, ScalarAdam};
use crate::error::{dims, Result};
use crate::numerics::SeededRng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const SQUASH_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// One draw from the squashed Gaussian policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SacPolicyOutput {
    pub mean: Vec<f64>,
    /// Clamped log standard deviation.
    pub log_std: Vec<f64>,
    pub pre_squash: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// `a = tanh(mu + sigma * noise)` and its log-density, including the
/// change-of-variables term `-sum log(1 - a^2 + 1e-6)`.
pub fn squash(mean: &[f64], log_std_raw: &[f64], noise: &[f64]) -> SacPolicyOutput {
    let log_std: Vec<f64> = log_std_raw.iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    let mut pre = Vec::with_capacity(mean.len());
    let mut act = Vec::with_capacity(mean.len());
    let mut lp = 0.0;
    for j in 0..mean.len() {
        let u = mean[j] + log_std[j].exp() * noise[j];
        let a = u.tanh();
        lp += -0.5 * noise[j] * noise[j] - log_std[j] - HALF_LN_2PI - (1.0 - a * a + SQUASH_EPS).ln();
        pre.push(u);
        act.push(a);
    }
    SacPolicyOutput {
        mean: mean.to_vec(),
        log_std,
        pre_squash: pre,
        action: act,
        log_prob: lp,
    }
}

pub fn concat_cols(parts: &[ArrayView2<f64>]) -> Result<Array2<f64>> {
    concatenate(Axis(1), parts).map_err(|e| dims("equal row counts", e))
}

fn row_matrix(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("single row")
}

#[derive(Debug, Clone)]
pub struct Sac {
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub opt_policy: Adam,
    pub opt_q1: Adam,
    pub opt_q2: Adam,
    pub log_alpha: f64,
    pub opt_alpha: ScalarAdam,
    pub target_entropy: f64,
    dim: usize,
}

/// A batch in network-input form: `obs` rows are state plus one-hot option.
#[derive(Debug, Clone)]
pub struct SacBatch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacLosses {
    pub critic1: f64,
    pub critic2: f64,
    pub policy: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SacRates {
    pub actor: f64,
    pub critic: f64,
    pub alpha: f64,
}

impl Sac {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], lr: SacRates, init_alpha: f64, rng: &mut SeededRng) -> Result<Self> {
        let sizes = |i: usize, o: usize| {
            let mut v = vec![i];
            v.extend_from_slice(hidden);
            v.push(o);
            v
        };
        let policy = Mlp::new(&sizes(obs_dim, 2 * action_dim), rng)?;
        let q1 = Mlp::new(&sizes(obs_dim + action_dim, 1), rng)?;
        let q2 = Mlp::new(&sizes(obs_dim + action_dim, 1), rng)?;
        Ok(Self::from_parts(policy, q1.clone(), q2.clone(), q1, q2, init_alpha.ln(), lr))
    }

    pub fn from_parts(policy: Mlp, q1: Mlp, q2: Mlp, q1_target: Mlp, q2_target: Mlp, log_alpha: f64, lr: SacRates) -> Self {
        let dim = policy.output_dim() / 2;
        Self {
            opt_policy: Adam::new(&policy, lr.actor),
            opt_q1: Adam::new(&q1, lr.critic),
            opt_q2: Adam::new(&q2, lr.critic),
            opt_alpha: ScalarAdam::new(lr.alpha),
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            log_alpha,
            target_entropy: -(dim as f64),
            dim,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn sample(&self, obs: &[f64], rng: &mut SeededRng) -> Result<SacPolicyOutput> {
        let out = self.policy.forward(row_matrix(obs).view())?;
        let r = out.row(0);
        let noise: Vec<f64> = (0..self.dim).map(|_| rng.normal()).collect();
        let r = r.as_slice().expect("row-major");
        Ok(squash(&r[..self.dim], &r[self.dim..], &noise))
    }

    /// `tanh(mu)`, the noise-free action.
    pub fn deterministic(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let out = self.policy.forward(row_matrix(obs).view())?;
        Ok(out.row(0).iter().take(self.dim).map(|m| m.tanh()).collect())
    }

    fn sample_batch(&self, obs: ArrayView2<f64>, noise: &Array2<f64>) -> Result<Vec<SacPolicyOutput>> {
        let out = self.policy.forward(obs)?;
        Ok(out
            .rows()
            .into_iter()
            .zip(noise.rows())
            .map(|(r, n)| {
                let r = r.as_slice().expect("row-major");
                squash(&r[..self.dim], &r[self.dim..], n.as_slice().expect("row-major"))
            })
            .collect())
    }

    /// `y = r + gamma (min_j Q_j^-(s', a') - alpha log pi(a'|s'))` with `a'`
    /// drawn from the current policy.
    pub fn targets(&self, batch: &SacBatch, gamma: f64, rng: &mut SeededRng) -> Result<Array1<f64>> {
        let n = batch.rewards.len();
        let noise = Array2::from_shape_simple_fn((n, self.dim), || rng.normal());
        if gamma == 0.0 {
            return Ok(Array1::from_vec(batch.rewards.clone()));
        }
        let draws = self.sample_batch(batch.next_obs.view(), &noise)?;
        let acts = Array2::from_shape_fn((n, self.dim), |(i, j)| draws[i].action[j]);
        let input = concat_cols(&[batch.next_obs.view(), acts.view()])?;
        let q1 = self.q1_target.forward(input.view())?;
        let q2 = self.q2_target.forward(input.view())?;
        let alpha = self.alpha();
        Ok(Array1::from_iter((0..n).map(|i| {
            batch.rewards[i] + gamma * (q1[[i, 0]].min(q2[[i, 0]]) - alpha * draws[i].log_prob)
        })))
    }

    /// Mean squared error of a critic against `y` and its gradient.
    pub fn critic_loss_and_grads(critic: &Mlp, input: ArrayView2<f64>, y: &Array1<f64>) -> Result<(f64, Grads)> {
        let (q, cache) = critic.forward_cached(input)?;
        let b = q.nrows();
        if y.len() != b {
            return Err(dims(b, y.len()));
        }
        let resid = Array2::from_shape_fn((b, 1), |(i, _)| q[[i, 0]] - y[i]);
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / b as f64;
        let g = resid.mapv(|r| 2.0 * r / b as f64);
        let (grads, _) = critic.backward(&cache, g.view())?;
        Ok((loss, grads))
    }

    /// `mean(alpha log pi(a~|s) - min_j Q_j(s, a~))` with `a~` reparameterized
    /// through `noise`. Returns the loss, the policy gradient and the mean
    /// log-probability.
    pub fn policy_loss_and_grads(
        policy: &Mlp,
        q1: &Mlp,
        q2: &Mlp,
        obs: ArrayView2<f64>,
        noise: &Array2<f64>,
        alpha: f64,
    ) -> Result<(f64, Grads, f64)> {
        let dim = policy.output_dim() / 2;
        let (out, cache) = policy.forward_cached(obs)?;
        let b = out.nrows();
        if noise.dim() != (b, dim) {
            return Err(dims(format!("{b}x{dim}"), format!("{:?}", noise.dim())));
        }
        let draws: Vec<SacPolicyOutput> = out
            .rows()
            .into_iter()
            .zip(noise.rows())
            .map(|(r, n)| {
                let r = r.as_slice().expect("row-major");
                squash(&r[..dim], &r[dim..], n.as_slice().expect("row-major"))
            })
            .collect();
        let acts = Array2::from_shape_fn((b, dim), |(i, j)| draws[i].action[j]);
        let input = concat_cols(&[obs, acts.view()])?;
        let (v1, c1) = q1.forward_cached(input.view())?;
        let (v2, c2) = q2.forward_cached(input.view())?;
        let ones = Array2::ones((b, 1));
        let (_, gi1) = q1.backward(&c1, ones.view())?;
        let (_, gi2) = q2.backward(&c2, ones.view())?;
        let obs_dim = obs.ncols();
        let mut loss = 0.0;
        let mut mean_lp = 0.0;
        let mut g = Array2::zeros(out.raw_dim());
        for i in 0..b {
            let first = v1[[i, 0]] <= v2[[i, 0]];
            let qmin = if first { v1[[i, 0]] } else { v2[[i, 0]] };
            let gi = if first { &gi1 } else { &gi2 };
            let d = &draws[i];
            loss += alpha * d.log_prob - qmin;
            mean_lp += d.log_prob;
            for j in 0..dim {
                let a = d.action[j];
                let dq_da = gi[[i, obs_dim + j]];
                let dlp_du = 2.0 * a * (1.0 - a * a) / (1.0 - a * a + SQUASH_EPS);
                let dl_du = alpha * dlp_du - dq_da * (1.0 - a * a);
                g[[i, j]] = dl_du / b as f64;
                let raw = out[[i, dim + j]];
                if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                    g[[i, dim + j]] = (dl_du * d.log_std[j].exp() * noise[[i, j]] - alpha) / b as f64;
                }
            }
        }
        let (grads, _) = policy.backward(&cache, g.view())?;
        Ok((loss / b as f64, grads, mean_lp / b as f64))
    }

    /// Gradient of `-log_alpha (log pi + target_entropy)` with respect to
    /// `log_alpha`.
    pub fn alpha_grad(mean_log_prob: f64, target_entropy: f64) -> f64 {
        -(mean_log_prob + target_entropy)
    }

    /// Critic, policy and temperature updates followed by a soft target
    /// update.
    pub fn update(&mut self, batch: &SacBatch, gamma: f64, tau_soft: f64, rng: &mut SeededRng) -> Result<SacLosses> {
        let y = self.targets(batch, gamma, rng)?;
        let input = concat_cols(&[batch.obs.view(), batch.actions.view()])?;
        let (l1, g1) = Self::critic_loss_and_grads(&self.q1, input.view(), &y)?;
        let (l2, g2) = Self::critic_loss_and_grads(&self.q2, input.view(), &y)?;
        let noise = Array2::from_shape_simple_fn((batch.rewards.len(), self.dim), || rng.normal());
        let alpha = self.alpha();
        let (lp, gp, mean_lp) = Self::policy_loss_and_grads(&self.policy, &self.q1, &self.q2, batch.obs.view(), &noise, alpha)?;
        let losses = SacLosses {
            critic1: l1,
            critic2: l2,
            policy: lp,
            alpha: -self.log_alpha * (mean_lp + self.target_entropy),
        };
        if ![l1, l2, lp, losses.alpha].iter().all(|x| x.is_finite()) {
            return Ok(losses);
        }
        self.opt_q1.step(&mut self.q1, &g1);
        self.opt_q2.step(&mut self.q2, &g2);
        self.opt_policy.step(&mut self.policy, &gp);
        let ga = Self::alpha_grad(mean_lp, self.target_entropy);
        self.opt_alpha.step(&mut self.log_alpha, ga);
        self.log_alpha = self.log_alpha.clamp(-20.0, 5.0);
        self.q1_target.soft_update_from(&self.q1, tau_soft);
        self.q2_target.soft_update_from(&self.q2, tau_soft);
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::mlp::tests::{fd_check, random_input};

    #[test]
    fn standard_normal_at_mean() {
        let d = squash(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(d.action, vec![0.0, 0.0]);
        // tanh correction at a = 0 is -ln(1 + 1e-6) per dimension
        let want = 2.0 * (-HALF_LN_2PI - (1.0f64 + 1e-6).ln());
        assert!((d.log_prob - want).abs() < 1e-15);
    }

    #[test]
    fn tiny_sigma_is_deterministic() {
        let d = squash(&[0.7], &[-20.0], &[2.5]);
        assert!((d.action[0] - 0.7f64.tanh()).abs() < 1e-8);
        assert_eq!(squash(&[0.0], &[50.0], &[0.0]).log_std, vec![LOG_STD_MAX]);
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        let (mu, ls) = (0.3, -0.4);
        let n = 200_000;
        let mut mass = 0.0;
        for i in 0..n {
            let a = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            let u = a.atanh();
            let noise = (u - mu) / f64::exp(ls);
            mass += squash(&[mu], &[ls], &[noise]).log_prob.exp() * 2.0 / n as f64;
        }
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }

    fn setup(seed: u64) -> (Sac, SacBatch, SeededRng) {
        let mut rng = SeededRng::new(seed);
        let rates = SacRates {
            actor: 1e-3,
            critic: 1e-3,
            alpha: 1e-3,
        };
        let sac = Sac::new(4, 2, &[6], rates, 0.2, &mut rng).unwrap();
        let batch = SacBatch {
            obs: random_input(&mut rng, 5, 4),
            actions: random_input(&mut rng, 5, 2).mapv(f64::tanh),
            rewards: (0..5).map(|_| rng.normal()).collect(),
            next_obs: random_input(&mut rng, 5, 4),
        };
        (sac, batch, rng)
    }

    #[test]
    fn targets_without_discount() {
        let (sac, batch, mut rng) = setup(1);
        assert_eq!(sac.targets(&batch, 0.0, &mut rng).unwrap().to_vec(), batch.rewards);
    }

    #[test]
    fn critic_gradient() {
        let (sac, batch, mut rng) = setup(2);
        let y = sac.targets(&batch, 0.9, &mut rng).unwrap();
        let input = concat_cols(&[batch.obs.view(), batch.actions.view()]).unwrap();
        let (_, g) = Sac::critic_loss_and_grads(&sac.q1, input.view(), &y).unwrap();
        let f = |n: &Mlp| Sac::critic_loss_and_grads(n, input.view(), &y).unwrap().0;
        assert!(fd_check(&sac.q1, &g.flat(), f) < 1e-4);
    }

    #[test]
    fn policy_gradient() {
        let (sac, batch, mut rng) = setup(3);
        let noise = random_input(&mut rng, 5, 2);
        let (_, g, _) = Sac::policy_loss_and_grads(&sac.policy, &sac.q1, &sac.q2, batch.obs.view(), &noise, 0.3).unwrap();
        let f = |n: &Mlp| {
            Sac::policy_loss_and_grads(n, &sac.q1, &sac.q2, batch.obs.view(), &noise, 0.3)
                .unwrap()
                .0
        };
        assert!(fd_check(&sac.policy, &g.flat(), f) < 1e-4);
    }

    #[test]
    fn zero_alpha_policy_loss_is_negative_min_q() {
        let (sac, batch, mut rng) = setup(4);
        let noise = random_input(&mut rng, 5, 2);
        let (l, _, _) = Sac::policy_loss_and_grads(&sac.policy, &sac.q1, &sac.q2, batch.obs.view(), &noise, 0.0).unwrap();
        let draws = sac.sample_batch(batch.obs.view(), &noise).unwrap();
        let acts = Array2::from_shape_fn((5, 2), |(i, j)| draws[i].action[j]);
        let input = concat_cols(&[batch.obs.view(), acts.view()]).unwrap();
        let q1 = sac.q1.forward(input.view()).unwrap();
        let q2 = sac.q2.forward(input.view()).unwrap();
        let want = -(0..5).map(|i| q1[[i, 0]].min(q2[[i, 0]])).sum::<f64>() / 5.0;
        assert!((l - want).abs() < 1e-12);
    }

    #[test]
    fn update_keeps_alpha_positive_and_params_finite() {
        let (mut sac, batch, mut rng) = setup(5);
        for _ in 0..50 {
            sac.update(&batch, 0.9, 0.01, &mut rng).unwrap();
            assert!(sac.alpha() > 0.0);
        }
        assert!(sac.policy.all_finite() && sac.q1.all_finite() && sac.q2_target.all_finite());
    }
}
