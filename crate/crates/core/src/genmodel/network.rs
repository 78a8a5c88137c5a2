//! Dense layers and the encoder/decoder stacks with manual backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Fully connected layer `y = x W + b`, with `W` stored `(in, out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dense<T: Real> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense { weight: Array2::zeros((n_in, n_out)), bias: Array1::zeros(n_out) }
    }

    /// Weights uniform in `±1/√n_in`, zero bias.
    pub fn fan_in_uniform<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let weight = Array2::from_shape_fn((n_in, n_out), |_| T::lit(rng.random_range(-bound..bound)));
        Dense { weight, bias: Array1::zeros(n_out) }
    }

    pub fn n_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂x`.
    fn backward(&self, x: &ArrayView2<T>, d_out: &Array2<T>, grad: &mut Dense<T>) -> Array2<T> {
        grad.weight += &x.t().dot(d_out);
        grad.bias += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.weight.t())
    }

    fn tensors(&self) -> [&[T]; 2] {
        [
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [T]; 2] {
        [
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

fn tanh_inplace<T: Real>(a: &mut Array2<T>) {
    a.mapv_inplace(|v| v.tanh());
}

fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `q_φ(z|x)`: hidden tanh stack followed by linear `μ` and `log σ²` heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Encoder<T: Real> {
    pub hidden: Vec<Dense<T>>,
    pub mu_head: Dense<T>,
    pub log_var_head: Dense<T>,
}

/// `p_θ(y|z)`: hidden tanh stack followed by a sigmoid output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Decoder<T: Real> {
    pub hidden: Vec<Dense<T>>,
    pub output: Dense<T>,
}

pub(crate) struct EncoderTape<T> {
    /// Inputs to each hidden layer, then the input to the heads.
    pub activations: Vec<Array2<T>>,
    pub mu: Array2<T>,
    pub log_var: Array2<T>,
}

pub(crate) struct DecoderTape<T> {
    pub activations: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T: Real> Encoder<T> {
    pub fn new<R: Rng>(input: usize, hidden: &[usize], latent: usize, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut n_in = input;
        for &h in hidden {
            layers.push(Dense::fan_in_uniform(n_in, h, rng));
            n_in = h;
        }
        Encoder {
            hidden: layers,
            mu_head: Dense::fan_in_uniform(n_in, latent, rng),
            log_var_head: Dense::zeros(n_in, latent),
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Encoder {
            hidden: self.hidden.iter().map(|l| Dense::zeros(l.n_in(), l.n_out())).collect(),
            mu_head: Dense::zeros(self.mu_head.n_in(), self.mu_head.n_out()),
            log_var_head: Dense::zeros(self.log_var_head.n_in(), self.log_var_head.n_out()),
        }
    }

    pub fn input_len(&self) -> usize {
        self.hidden.first().unwrap_or(&self.mu_head).n_in()
    }

    pub(crate) fn forward(&self, x: ArrayView2<T>) -> EncoderTape<T> {
        let mut activations = vec![x.to_owned()];
        for layer in &self.hidden {
            let mut a = layer.forward(&activations.last().expect("non-empty").view());
            tanh_inplace(&mut a);
            activations.push(a);
        }
        let h = activations.last().expect("non-empty").view();
        let mu = self.mu_head.forward(&h);
        let log_var = self.log_var_head.forward(&h);
        EncoderTape { activations, mu, log_var }
    }

    pub(crate) fn backward(
        &self,
        tape: &EncoderTape<T>,
        d_mu: &Array2<T>,
        d_log_var: &Array2<T>,
        grad: &mut Encoder<T>,
    ) {
        let n = tape.activations.len();
        let h = tape.activations[n - 1].view();
        let mut d_h = self.mu_head.backward(&h, d_mu, &mut grad.mu_head);
        d_h += &self.log_var_head.backward(&h, d_log_var, &mut grad.log_var_head);
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let out = &tape.activations[i + 1];
            let d_pre = &d_h * &out.mapv(|v| T::one() - v * v);
            d_h = layer.backward(&tape.activations[i].view(), &d_pre, &mut grad.hidden[i]);
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = self.hidden.iter().flat_map(|l| l.tensors()).collect();
        out.extend(self.mu_head.tensors());
        out.extend(self.log_var_head.tensors());
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = self.hidden.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        out.extend(self.mu_head.tensors_mut());
        out.extend(self.log_var_head.tensors_mut());
        out
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.hidden.iter().all(Dense::is_finite) && self.mu_head.is_finite() && self.log_var_head.is_finite()
    }
}

impl<T: Real> Decoder<T> {
    pub fn new<R: Rng>(latent: usize, hidden: &[usize], output: usize, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut n_in = latent;
        for &h in hidden {
            layers.push(Dense::fan_in_uniform(n_in, h, rng));
            n_in = h;
        }
        Decoder { hidden: layers, output: Dense::fan_in_uniform(n_in, output, rng) }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Decoder {
            hidden: self.hidden.iter().map(|l| Dense::zeros(l.n_in(), l.n_out())).collect(),
            output: Dense::zeros(self.output.n_in(), self.output.n_out()),
        }
    }

    pub fn latent_len(&self) -> usize {
        self.hidden.first().unwrap_or(&self.output).n_in()
    }

    pub(crate) fn forward(&self, z: ArrayView2<T>) -> DecoderTape<T> {
        let mut activations = vec![z.to_owned()];
        for layer in &self.hidden {
            let mut a = layer.forward(&activations.last().expect("non-empty").view());
            tanh_inplace(&mut a);
            activations.push(a);
        }
        let mut output = self.output.forward(&activations.last().expect("non-empty").view());
        output.mapv_inplace(sigmoid);
        DecoderTape { activations, output }
    }

    /// Backpropagates `∂L/∂output` and returns `∂L/∂z`.
    pub(crate) fn backward(&self, tape: &DecoderTape<T>, d_output: &Array2<T>, grad: &mut Decoder<T>) -> Array2<T> {
        let n = tape.activations.len();
        let d_pre = d_output * &tape.output.mapv(|y| y * (T::one() - y));
        let mut d_h = self.output.backward(&tape.activations[n - 1].view(), &d_pre, &mut grad.output);
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let out = &tape.activations[i + 1];
            let d_pre = &d_h * &out.mapv(|v| T::one() - v * v);
            d_h = layer.backward(&tape.activations[i].view(), &d_pre, &mut grad.hidden[i]);
        }
        d_h
    }

    pub(crate) fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = self.hidden.iter().flat_map(|l| l.tensors()).collect();
        out.extend(self.output.tensors());
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = self.hidden.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        out.extend(self.output.tensors_mut());
        out
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.hidden.iter().all(Dense::is_finite) && self.output.is_finite()
    }
}
