//! Dueling double deep Q-network over the option catalog.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::mlp::{Adam, Grads, Mlp};
use crate::error::{dims, Result};
use crate::numerics::SeededRng;

/// `Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')`.
pub fn dueling_q(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|a| value + a - mean).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Linear decay from `start` to `end` over `horizon` steps, then flat.
pub fn epsilon_at(step: u64, start: f64, end: f64, horizon: u64) -> f64 {
    if step >= horizon {
        return end;
    }
    start + (end - start) * (step as f64 / horizon as f64)
}

/// Head output `[V, A_0 .. A_{n-1}]` turned into Q values, row by row.
fn combine(out: &Array2<f64>) -> Array2<f64> {
    let n = out.ncols() - 1;
    let mut q = Array2::zeros((out.nrows(), n));
    for (mut qr, r) in q.rows_mut().into_iter().zip(out.rows()) {
        let adv = r.slice(ndarray::s![1..]);
        let mean = adv.sum() / n as f64;
        for j in 0..n {
            qr[j] = r[0] + adv[j] - mean;
        }
    }
    q
}

#[derive(Debug, Clone)]
pub struct D3qn {
    pub online: Mlp,
    pub target: Mlp,
    pub opt: Adam,
    num_options: usize,
}

impl D3qn {
    pub fn new(state_dim: usize, num_options: usize, hidden: &[usize], lr: f64, rng: &mut SeededRng) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1 + num_options);
        let online = Mlp::new(&sizes, rng)?;
        let opt = Adam::new(&online, lr);
        Ok(Self {
            target: online.clone(),
            online,
            opt,
            num_options,
        })
    }

    pub fn from_parts(online: Mlp, target: Mlp, lr: f64) -> Self {
        let num_options = online.output_dim() - 1;
        let opt = Adam::new(&online, lr);
        Self {
            online,
            target,
            opt,
            num_options,
        }
    }

    pub fn num_options(&self) -> usize {
        self.num_options
    }

    pub fn q_values(net: &Mlp, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(combine(&net.forward(states)?))
    }

    pub fn greedy(&self, state: &[f64]) -> Result<usize> {
        let x = Array2::from_shape_vec((1, state.len()), state.to_vec()).map_err(|e| dims(state.len(), e))?;
        let q = Self::q_values(&self.online, x.view())?;
        Ok(argmax(q.row(0).as_slice().expect("row-major")))
    }

    /// Uniform option with probability `eps`, greedy otherwise. The uniform
    /// draw is consumed on every call so the stream does not depend on `eps`.
    pub fn select(&self, state: &[f64], eps: f64, rng: &mut SeededRng) -> Result<usize> {
        let u = rng.uniform();
        let pick = rng.below(self.num_options);
        if u < eps {
            Ok(pick)
        } else {
            self.greedy(state)
        }
    }

    /// `y = r + gamma Q_target(s', argmax_a Q_online(s', a))`.
    pub fn targets(&self, rewards: &[f64], next_states: ArrayView2<f64>, gamma: f64) -> Result<Array1<f64>> {
        double_q_targets(&self.online, &self.target, rewards, next_states, gamma)
    }

    /// Mean squared TD error and its gradient for the online network.
    pub fn loss_and_grads(net: &Mlp, states: ArrayView2<f64>, options: &[usize], y: &Array1<f64>) -> Result<(f64, Grads)> {
        let (out, cache) = net.forward_cached(states)?;
        let q = combine(&out);
        let (b, n) = q.dim();
        if options.len() != b || y.len() != b {
            return Err(dims(b, options.len().min(y.len())));
        }
        let mut loss = 0.0;
        let mut g = Array2::zeros(out.raw_dim());
        for i in 0..b {
            let r = q[[i, options[i]]] - y[i];
            loss += r * r;
            let d = 2.0 * r / b as f64;
            // dQ_a/dV = 1, dQ_a/dA_j = [j == a] - 1/n
            g[[i, 0]] = d;
            for j in 0..n {
                g[[i, 1 + j]] = -d / n as f64;
            }
            g[[i, 1 + options[i]]] += d;
        }
        let (grads, _) = net.backward(&cache, g.view())?;
        Ok((loss / b as f64, grads))
    }

    /// One gradient step on a batch; returns the loss.
    pub fn train_batch(
        &mut self,
        states: ArrayView2<f64>,
        options: &[usize],
        rewards: &[f64],
        next_states: ArrayView2<f64>,
        gamma: f64,
    ) -> Result<f64> {
        let y = self.targets(rewards, next_states, gamma)?;
        let (loss, grads) = Self::loss_and_grads(&self.online, states, options, &y)?;
        if loss.is_finite() {
            self.opt.step(&mut self.online, &grads);
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}

/// Double-Q bootstrap: the argmax comes from `online`, the value from
/// `target`.
pub fn double_q_targets(online: &Mlp, target: &Mlp, rewards: &[f64], next_states: ArrayView2<f64>, gamma: f64) -> Result<Array1<f64>> {
    if rewards.len() != next_states.nrows() {
        return Err(dims(next_states.nrows(), rewards.len()));
    }
    if gamma == 0.0 {
        return Ok(Array1::from_vec(rewards.to_vec()));
    }
    let q_on = D3qn::q_values(online, next_states)?;
    let q_tg = D3qn::q_values(target, next_states)?;
    Ok(Array1::from_iter(
        q_on.axis_iter(Axis(0))
            .zip(q_tg.axis_iter(Axis(0)))
            .zip(rewards)
            .map(|((on, tg), r)| {
                let a = argmax(on.as_slice().expect("row-major"));
                r + gamma * tg[a]
            }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::mlp::tests::{fd_check, random_input};

    #[test]
    fn dueling_examples() {
        assert_eq!(dueling_q(5.0, &[1.0, 2.0, 3.0]), vec![4.0, 5.0, 6.0]);
        assert_eq!(dueling_q(2.5, &[7.0; 4]), vec![2.5; 4]);
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon_at(0, 1.0, 0.05, 100), 1.0);
        assert!((epsilon_at(50, 1.0, 0.05, 100) - 0.525).abs() < 1e-12);
        assert_eq!(epsilon_at(1000, 1.0, 0.05, 100), 0.05);
    }

    #[test]
    fn mean_centered() {
        let mut rng = SeededRng::new(1);
        let d = D3qn::new(5, 7, &[8], 1e-3, &mut rng).unwrap();
        let x = random_input(&mut rng, 6, 5);
        let out = d.online.forward(x.view()).unwrap();
        let q = D3qn::q_values(&d.online, x.view()).unwrap();
        for i in 0..6 {
            let m: f64 = q.row(i).iter().map(|v| v - out[[i, 0]]).sum::<f64>() / 7.0;
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples_and_gradient() {
        let mut rng = SeededRng::new(2);
        let d = D3qn::new(3, 4, &[6], 1e-3, &mut rng).unwrap();
        let x = random_input(&mut rng, 5, 3);
        let opts = [0, 3, 1, 1, 2];
        let q = D3qn::q_values(&d.online, x.view()).unwrap();
        let y = Array1::from_iter((0..5).map(|i| q[[i, opts[i]]]));
        assert!(D3qn::loss_and_grads(&d.online, x.view(), &opts, &y).unwrap().0 < 1e-24);
        let y2 = Array1::from_iter((0..1).map(|_| q[[0, 0]] + 2.0));
        let l = D3qn::loss_and_grads(&d.online, x.slice(ndarray::s![0..1, ..]), &opts[..1], &y2)
            .unwrap()
            .0;
        assert!((l - 4.0).abs() < 1e-12);
        let y = Array1::from_iter((0..5).map(|_| rng.normal()));
        let (_, g) = D3qn::loss_and_grads(&d.online, x.view(), &opts, &y).unwrap();
        let f = |n: &Mlp| D3qn::loss_and_grads(n, x.view(), &opts, &y).unwrap().0;
        assert!(fd_check(&d.online, &g.flat(), f) < 1e-4);
    }

    #[test]
    fn select_extremes() {
        let mut rng = SeededRng::new(3);
        let d = D3qn::new(2, 5, &[4], 1e-3, &mut rng).unwrap();
        let s = [0.3, -0.2];
        let g = d.greedy(&s).unwrap();
        for _ in 0..20 {
            assert_eq!(d.select(&s, 0.0, &mut rng).unwrap(), g);
        }
        let a: Vec<usize> = (0..10).map(|_| d.select(&s, 1.0, &mut SeededRng::new(4)).unwrap()).collect();
        assert!(a.iter().all(|&v| v == a[0]));
    }
}
