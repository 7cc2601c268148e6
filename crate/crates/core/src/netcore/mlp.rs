//! Dense layer stacks with a recorded forward trace and manual reverse pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;
use crate::scalar::{axpy, dot, Scalar};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu,
    Linear,
    /// Linear output read as action logits; the softmax lives in the sampler and losses.
    SoftmaxHead,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::LeakyRelu => {
                if z > T::zero() {
                    z
                } else {
                    z * T::lit(LEAKY_SLOPE)
                }
            }
            Activation::Linear | Activation::SoftmaxHead => z,
        }
    }

    #[inline]
    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::LeakyRelu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::lit(LEAKY_SLOPE)
                }
            }
            Activation::Linear | Activation::SoftmaxHead => T::one(),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Linear => 1,
            Activation::SoftmaxHead => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::LeakyRelu),
            1 => Some(Activation::Linear),
            2 => Some(Activation::SoftmaxHead),
            _ => None,
        }
    }
}

/// One fully connected layer. `weights` is row-major `[outputs × inputs]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
            activation,
        }
    }

    /// Orthogonal weights scaled by `gain`, zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(inputs, outputs, activation);
        let w = orthogonal_matrix(outputs, inputs, rng);
        for (dst, src) in layer.weights.iter_mut().zip(w) {
            *dst = T::lit(src * gain);
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[T] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }
}

/// Random matrix with orthonormal rows (when `rows <= cols`) or columns.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (n_vec, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_vec);
    while basis.len() < n_vec {
        let mut v: Vec<f64> = (0..len).map(|_| gaussian(rng)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { basis[r][c] } else { basis[c][r] };
        }
    }
    out
}

/// Standard normal draw (Box-Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Ordered stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Activations recorded by [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct MlpTrace<T> {
    /// Input to each layer.
    pub inputs: Vec<Vec<T>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Vec<T>>,
    pub output: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    /// Builds a stack from `sizes = [in, h1, ..., out]`: leaky ReLU on every
    /// layer except the last, which gets `last`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], last: Activation, last_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least one layer");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (act, gain) = if k + 1 == n {
                    (last, last_gain)
                } else {
                    (Activation::LeakyRelu, std::f64::consts::SQRT_2)
                };
                Dense::orthogonal(sizes[k], sizes[k + 1], act, gain, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize], last: Activation) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let act = if k + 1 == n { last } else { Activation::LeakyRelu };
                Dense::zeros(sizes[k], sizes[k + 1], act)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Consecutive layers chain and every parameter is finite.
    pub fn validate(&self) -> Result<(), NetError> {
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NetError::Config(format!(
                    "layer output {} does not chain into input {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(NetError::Config("layer buffer has the wrong length".into()));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite("parameter"));
            }
        }
        Ok(())
    }

    /// Output only, no trace.
    pub fn eval(&self, x: &[T]) -> Result<Vec<T>, NetError> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for l in &self.layers {
            cur = (0..l.outputs)
                .map(|o| l.activation.apply(dot(l.row(o), &cur) + l.bias[o]))
                .collect();
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[T]) -> Result<MlpTrace<T>, NetError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for l in &self.layers {
            let z: Vec<T> = (0..l.outputs).map(|o| dot(l.row(o), &cur) + l.bias[o]).collect();
            let a: Vec<T> = z.iter().map(|&v| l.activation.apply(v)).collect();
            inputs.push(cur);
            pre.push(z);
            cur = a;
        }
        Ok(MlpTrace { inputs, pre, output: cur })
    }

    fn check_input(&self, x: &[T]) -> Result<(), NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::Config(format!(
                "input length {} does not match network input {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Accumulates `d loss / d params` into `grads` (layout: per layer weights then
    /// bias, in layer order) and returns `d loss / d input` when asked.
    pub fn backward(
        &self,
        trace: &MlpTrace<T>,
        grad_out: &[T],
        grads: &mut [T],
        want_input_grad: bool,
    ) -> Result<Option<Vec<T>>, NetError> {
        if trace.inputs.len() != self.layers.len()
            || grad_out.len() != self.output_dim()
            || grads.len() != self.param_count()
            || self
                .layers
                .iter()
                .zip(&trace.inputs)
                .any(|(l, x)| l.inputs != x.len())
        {
            return Err(NetError::StaleTrace);
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }
        let mut upstream = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let delta: Vec<T> = upstream
                .iter()
                .zip(&trace.pre[k])
                .map(|(&g, &z)| g * l.activation.derivative(z))
                .collect();
            let (gw, gb) = grads[offsets[k]..offsets[k] + l.param_count()].split_at_mut(l.weights.len());
            let x = &trace.inputs[k];
            for (o, &d) in delta.iter().enumerate() {
                if d != T::zero() {
                    axpy(d, x, &mut gw[o * l.inputs..(o + 1) * l.inputs]);
                }
                gb[o] += d;
            }
            if k > 0 || want_input_grad {
                let mut down = vec![T::zero(); l.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d != T::zero() {
                        axpy(d, l.row(o), &mut down);
                    }
                }
                upstream = down;
            }
        }
        Ok(if want_input_grad { Some(upstream) } else { None })
    }

    /// Parameters flattened in declaration order.
    pub fn flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }
}
