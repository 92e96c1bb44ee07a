//! MLP layers, Glorot-uniform initialization, Adam, and the two-phase
//! learning-rate schedule (constant, then linear decay to zero).

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// Discriminator hidden layers; default slope 0.01.
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply_values(self, xs: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for x in xs.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
            }
            Activation::LeakyRelu(s) => {
                for x in xs.iter_mut() {
                    if *x < 0.0 {
                        *x *= s;
                    }
                }
            }
            Activation::Tanh => {
                for x in xs.iter_mut() {
                    *x = x.tanh();
                }
            }
            Activation::Sigmoid => {
                for x in xs.iter_mut() {
                    *x = 1.0 / (1.0 + (-*x).exp());
                }
            }
        }
    }

    fn apply_graph(self, g: &mut Graph, t: Tensor) -> Tensor {
        match self {
            Activation::Identity => t,
            Activation::Relu => g.relu(t),
            Activation::LeakyRelu(s) => g.leaky_relu(t, s),
            Activation::Tanh => g.tanh(t),
            Activation::Sigmoid => g.sigmoid(t),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::LeakyRelu(_) => 2,
            Activation::Tanh => 3,
            Activation::Sigmoid => 4,
        }
    }

    pub fn from_code(code: u8, slope: f64) -> Result<Self> {
        Ok(match code {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu(slope),
            3 => Activation::Tanh,
            4 => Activation::Sigmoid,
            _ => return Err(Error::Checkpoint(format!("unknown activation code {code}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `in_dim × out_dim`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`,
    /// zero biases. Deterministic per RNG state.
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "mlp needs at least [in, out] dims, got {dims:?}"
            )));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("zero layer width".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (k, win) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (win[0], win[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-a..a))
                .collect();
            layers.push(Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                weight,
                bias: vec![0.0; fan_out],
                activation: activations[k],
            });
        }
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("mlp with no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::InvalidConfig(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Parameter lengths in update order (weight then bias per layer).
    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect()
    }

    /// Mutable parameter slices in update order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Plain value forward pass, no tape. Shares its arithmetic with the
    /// bound forward so both produce bit-identical outputs.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimMismatch(format!(
                "input has {} columns, net expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let rows = x.rows();
        let mut cur = x.data().to_vec();
        let mut cur_cols = x.cols();
        for l in &self.layers {
            let mut h = matmul(&cur, &l.weight, rows, cur_cols, l.out_dim);
            for i in 0..rows {
                for j in 0..l.out_dim {
                    h[i * l.out_dim + j] += l.bias[j];
                }
            }
            l.activation.apply_values(&mut h);
            cur = h;
            cur_cols = l.out_dim;
        }
        Matrix::new(rows, cur_cols, cur)
    }

    /// Insert every parameter as a leaf on `g`. Bind once per episode so that
    /// repeated uses of the net accumulate into the same gradients.
    pub fn bind(&self, g: &mut Graph, name: &'static str) -> Result<BoundMlp> {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            weights.push(g.leaf(&[l.in_dim, l.out_dim], l.weight.clone())?);
            biases.push(g.leaf(&[l.out_dim], l.bias.clone())?);
            activations.push(l.activation);
        }
        Ok(BoundMlp {
            name,
            weights,
            biases,
            activations,
        })
    }
}

/// An [`Mlp`] whose parameters live as leaves on a specific graph.
pub struct BoundMlp {
    name: &'static str,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
    activations: Vec<Activation>,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, x: Tensor) -> Result<Tensor> {
        let mut cur = x;
        for i in 0..self.weights.len() {
            let h = g.matmul(cur, self.weights[i])?;
            let hb = g.add_bias(h, self.biases[i])?;
            cur = self.activations[i].apply_graph(g, hb);
        }
        Ok(cur)
    }

    /// Gradients in update order (weight then bias per layer). Errors with
    /// the parameter's name if backward has not populated it.
    pub fn grads(&self, g: &Graph) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for i in 0..self.weights.len() {
            for (t, kind) in [(self.weights[i], "weight"), (self.biases[i], "bias")] {
                match g.grad(t) {
                    Some(grad) => out.push(grad.to_vec()),
                    None => {
                        return Err(Error::MissingGrad {
                            name: format!("{}.layer{}.{}", self.name, i, kind),
                        })
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Adam with bias correction. One state covers a fixed list of parameter
/// tensors, addressed by position.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(param_sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) {
        self.step = step;
        self.m = m;
        self.v = v;
    }
}

/// One Adam update over `params` with matching `grads`.
pub fn adam_step(
    state: &mut AdamState,
    mut params: Vec<&mut [f64]>,
    grads: &[Vec<f64>],
    lr: f64,
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::InvalidArg(format!(
            "adam got {} params / {} grads for {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (idx, p) in params.iter_mut().enumerate() {
        let g = &grads[idx];
        if g.len() != p.len() {
            return Err(Error::InvalidArg(format!(
                "adam param {idx}: {} values vs {} gradient entries",
                p.len(),
                g.len()
            )));
        }
        let (m, v) = (&mut state.m[idx], &mut state.v[idx]);
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Constant `base` until `decay_start`, then linear to zero at `total`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub decay_start: usize,
    pub total: usize,
}

impl LrSchedule {
    pub fn new(base: f64, decay_start: usize, total: usize) -> Result<Self> {
        if decay_start > total {
            return Err(Error::InvalidConfig(format!(
                "decay start {decay_start} past total epochs {total}"
            )));
        }
        Ok(Self {
            base,
            decay_start,
            total,
        })
    }

    /// Learning rate for `epoch`; valid for `0..=total` (`total` maps to 0).
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        if epoch > self.total {
            return Err(Error::InvalidArg(format!(
                "epoch {epoch} out of range 0..={}",
                self.total
            )));
        }
        if epoch < self.decay_start {
            Ok(self.base)
        } else if self.total == self.decay_start {
            Ok(if epoch == self.total { 0.0 } else { self.base })
        } else {
            Ok(self.base * (self.total - epoch) as f64 / (self.total - self.decay_start) as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = Mlp::init(&[2, 8, 2], &[Activation::Relu, Activation::Identity], &mut rng(7)).unwrap();
        let b = Mlp::init(&[2, 8, 2], &[Activation::Relu, Activation::Identity], &mut rng(7)).unwrap();
        for (la, lb) in a.layers().iter().zip(b.layers()) {
            assert_eq!(la.weight, lb.weight);
            assert_eq!(la.bias, lb.bias);
        }
    }

    #[test]
    fn init_respects_glorot_bound() {
        let net = Mlp::init(&[3, 5], &[Activation::Identity], &mut rng(1)).unwrap();
        let a = (6.0_f64 / 8.0).sqrt();
        for l in net.layers() {
            assert!(l.weight.iter().all(|w| w.abs() < a));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_input_identity_net_gives_zero() {
        let net = Mlp::init(&[2, 4, 2], &[Activation::Identity, Activation::Identity], &mut rng(3)).unwrap();
        let x = Matrix::zeros(5, 2);
        let y = net.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_dims_rejected() {
        assert!(Mlp::init(&[], &[], &mut rng(0)).is_err());
        assert!(Mlp::init(&[4], &[], &mut rng(0)).is_err());
    }

    #[test]
    fn bound_forward_matches_value_forward_bitwise() {
        let net = Mlp::init(
            &[2, 6, 3],
            &[Activation::Relu, Activation::Sigmoid],
            &mut rng(11),
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![0.3, -0.8], vec![1.2, 0.05]]).unwrap();
        let plain = net.forward(&x).unwrap();
        let mut g = Graph::new();
        let xt = g.leaf(&[2, 2], x.data().to_vec()).unwrap();
        let bound = net.bind(&mut g, "net").unwrap();
        let yt = bound.forward(&mut g, xt).unwrap();
        assert_eq!(g.data(yt), plain.data());
    }

    #[test]
    fn adam_with_zero_gradients_is_identity() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut st = AdamState::new(&[3], 0.5, 0.999, 1e-8);
        let before = p.clone();
        adam_step(&mut st, vec![p.as_mut_slice()], &[vec![0.0; 3]], 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_magnitude_is_about_lr() {
        let mut p = vec![0.0];
        let mut st = AdamState::new(&[1], 0.5, 0.999, 1e-8);
        adam_step(&mut st, vec![p.as_mut_slice()], &[vec![1.0]], 0.1).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-6, "got {}", p[0]);
    }

    #[test]
    fn adam_rejects_mismatched_grads() {
        let mut p = vec![0.0; 2];
        let mut st = AdamState::new(&[2], 0.5, 0.999, 1e-8);
        assert!(adam_step(&mut st, vec![p.as_mut_slice()], &[vec![1.0]], 0.1).is_err());
    }

    #[test]
    fn missing_grad_names_parameter() {
        let net = Mlp::init(&[2, 3], &[Activation::Identity], &mut rng(5)).unwrap();
        let mut g = Graph::new();
        let bound = net.bind(&mut g, "e1").unwrap();
        match bound.grads(&g) {
            Err(Error::MissingGrad { name }) => assert_eq!(name, "e1.layer0.weight"),
            other => panic!("expected MissingGrad, got {other:?}"),
        }
    }

    #[test]
    fn schedule_matches_published_recipe() {
        let s = LrSchedule::new(2e-4, 100, 200).unwrap();
        assert_eq!(s.lr_at(0).unwrap(), 2e-4);
        assert_eq!(s.lr_at(99).unwrap(), 2e-4);
        assert!((s.lr_at(150).unwrap() - 1e-4).abs() < 1e-18);
        assert!((s.lr_at(199).unwrap() - 2e-6).abs() < 1e-18);
        assert_eq!(s.lr_at(200).unwrap(), 0.0);
        assert!(s.lr_at(201).is_err());
    }

    #[test]
    fn schedule_is_non_increasing() {
        let s = LrSchedule::new(3e-3, 40, 90).unwrap();
        let mut prev = f64::INFINITY;
        for e in 0..=90 {
            let lr = s.lr_at(e).unwrap();
            assert!(lr <= prev);
            prev = lr;
        }
        assert_eq!(prev, 0.0);
    }
}
