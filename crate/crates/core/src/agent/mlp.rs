//! Fully connected ReLU networks with exact backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{dims, invalid, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`, so a batch row `x` maps to `x W + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// ReLU hidden layers, linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input of every layer (`inputs[0]` is the network input).
    inputs: Vec<Array2<f64>>,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Dense>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w += &b.w;
            a.b += &b.b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.w.iter().chain(l.b.iter()).map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w *= s;
            l.b *= s;
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

impl Mlp {
    /// Network with layer widths `sizes` (input first, output last),
    /// He-uniform weights and zero biases. The output layer is scaled down
    /// so initial outputs stay near zero.
    pub fn new(sizes: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let limit = (6.0 / w[0] as f64).sqrt() * if i == last { 0.1 } else { 1.0 };
                Dense {
                    w: Array2::from_shape_simple_fn((w[0], w[1]), || rng.uniform_in(-limit, limit)),
                    b: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Dense {
                    w: Array2::zeros((w[0], w[1])),
                    b: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Cache)> {
        if x.ncols() != self.input_dim() {
            return Err(dims(format!("{} inputs", self.input_dim()), format!("{} inputs", x.ncols())));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.w);
            z += &l.b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(h);
            h = z;
        }
        Ok((h, Cache { inputs }))
    }

    /// Gradients of `sum(grad_out .* output)` with respect to the parameters
    /// and to the input.
    pub fn backward(&self, cache: &Cache, grad_out: ArrayView2<f64>) -> Result<(Grads, Array2<f64>)> {
        if grad_out.ncols() != self.output_dim() || grad_out.nrows() != cache.inputs[0].nrows() {
            return Err(dims(
                format!("{}x{}", cache.inputs[0].nrows(), self.output_dim()),
                format!("{:?}", grad_out.dim()),
            ));
        }
        let mut g = grad_out.to_owned();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let gw = input.t().dot(&g);
            let gb = g.sum_axis(Axis(0));
            let mut gi = g.dot(&l.w.t());
            if i > 0 {
                // input of layer i is relu(pre-activation); zero where it was clipped
                ndarray::Zip::from(&mut gi).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            layers.push(Dense { w: gw, b: gb });
            g = gi;
        }
        layers.reverse();
        Ok((Grads { layers }, g))
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, src: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&src.layers) {
            t.w.zip_mut_with(&s.w, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.b.zip_mut_with(&s.b, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|x| x.is_finite()))
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(dims(self.num_params(), values.len()));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip, if any.
    pub clip: Option<f64>,
    m: Grads,
    v: Grads,
    t: u64,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip: Some(10.0),
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        let mut g = grads.clone();
        if let Some(c) = self.clip {
            let n = g.norm();
            if n > c {
                g.scale(c / n);
            }
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let (lr, eps) = (self.lr, self.eps);
        for (((p, g), m), v) in net.layers.iter_mut().zip(&g.layers).zip(&mut self.m.layers).zip(&mut self.v.layers) {
            let upd = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut p.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
            ndarray::Zip::from(&mut p.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
        }
    }
}

/// Adam on a single scalar parameter.
#[derive(Debug, Clone, Default)]
pub struct ScalarAdam {
    pub lr: f64,
    m: f64,
    v: f64,
    t: u64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        Self { lr, ..Default::default() }
    }

    pub fn step(&mut self, param: &mut f64, grad: f64) {
        self.t += 1;
        self.m = 0.9 * self.m + 0.1 * grad;
        self.v = 0.999 * self.v + 0.001 * grad * grad;
        let mh = self.m / (1.0 - 0.9f64.powi(self.t as i32));
        let vh = self.v / (1.0 - 0.999f64.powi(self.t as i32));
        *param -= self.lr * mh / (vh.sqrt() + 1e-8);
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::Array2;

    pub fn random_input(rng: &mut SeededRng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.normal())
    }

    /// Max relative error between an analytic gradient and central
    /// differences of `f` over the flattened parameters.
    pub fn fd_check(net: &Mlp, analytic: &[f64], f: impl Fn(&Mlp) -> f64) -> f64 {
        let base = net.flat();
        let mut probe = net.clone();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.set_flat(&p).unwrap();
            let up = f(&probe);
            p[i] -= 2.0 * h;
            probe.set_flat(&p).unwrap();
            let down = f(&probe);
            let num = (up - down) / (2.0 * h);
            let err = (num - analytic[i]).abs() / num.abs().max(analytic[i].abs()).max(1e-3);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn zero_network_zero_output() {
        let net = Mlp::zeros(&[3, 5, 2]);
        let out = net.forward(Array2::from_elem((4, 3), 1.7).view()).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(3);
        let net = Mlp::new(&[4, 6, 5, 3], &mut rng).unwrap();
        let x = random_input(&mut rng, 5, 4);
        let w = random_input(&mut rng, 5, 3);
        let loss = |n: &Mlp| (n.forward(x.view()).unwrap() * &w).sum();
        let (_, cache) = net.forward_cached(x.view()).unwrap();
        let (g, gx) = net.backward(&cache, w.view()).unwrap();
        assert!(fd_check(&net, &g.flat(), loss) < 1e-4);
        // input gradient
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.as_slice_mut().unwrap()[i] += h;
            let up = (net.forward(xp.view()).unwrap() * &w).sum();
            xp.as_slice_mut().unwrap()[i] -= 2.0 * h;
            let down = (net.forward(xp.view()).unwrap() * &w).sum();
            let num = (up - down) / (2.0 * h);
            let ana = gx.as_slice().unwrap()[i];
            assert!((num - ana).abs() <= 1e-4 * num.abs().max(1e-3), "{num} vs {ana}");
        }
    }

    #[test]
    fn forward_deterministic_and_checked() {
        let net = Mlp::new(&[2, 3, 1], &mut SeededRng::new(1)).unwrap();
        let x = Array2::from_elem((2, 2), 0.3);
        assert_eq!(net.forward(x.view()).unwrap(), net.forward(x.view()).unwrap());
        assert!(net.forward(Array2::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn soft_update_limits() {
        let mut rng = SeededRng::new(2);
        let a = Mlp::new(&[2, 3, 1], &mut rng).unwrap();
        let b = Mlp::new(&[2, 3, 1], &mut rng).unwrap();
        let mut t = b.clone();
        t.soft_update_from(&a, 0.0);
        assert_eq!(t, b);
        t.soft_update_from(&a, 1.0);
        assert_eq!(t, a);
    }

    #[test]
    fn adam_reduces_quadratic() {
        let mut rng = SeededRng::new(5);
        let mut net = Mlp::new(&[3, 8, 1], &mut rng).unwrap();
        let x = random_input(&mut rng, 16, 3);
        let target = x.sum_axis(Axis(1)).insert_axis(Axis(1));
        let loss = |n: &Mlp| {
            let d = n.forward(x.view()).unwrap() - &target;
            d.mapv(|v| v * v).mean().unwrap()
        };
        let before = loss(&net);
        let mut opt = Adam::new(&net, 0.01);
        for _ in 0..300 {
            let (out, cache) = net.forward_cached(x.view()).unwrap();
            let g = (out - &target) * (2.0 / 16.0);
            let (grads, _) = net.backward(&cache, g.view()).unwrap();
            opt.step(&mut net, &grads);
        }
        assert!(loss(&net) < 0.1 * before);
        assert!(net.all_finite());
    }
}
