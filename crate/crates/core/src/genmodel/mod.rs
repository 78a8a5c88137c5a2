//! Prior-conditioned variational encoder/decoder for spectrum transfer.
//!
//! The encoder sees the resampled modality-A spectrum concatenated with the
//! deconstruction features of its prior fit; the decoder maps a latent
//! vector to the modality-B spectrum on its canonical grid.

pub mod checkpoint;
mod network;
mod train;

pub use network::{Decoder, Dense, Encoder};
pub use train::{train, train_with_observer, EpochLoss, TrainedModel};

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::deconstruct::{deconstruction_features, Deconstruction};
use crate::error::{Error, Result};
use crate::lineshape::PeakKind;
use crate::scalar::Real;
use crate::seeds::stream_rng;
use crate::spectrum::{normalize_minmax, GridSpec, Modality, Spectrum};

/// Network and optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_len: usize,
    pub feature_len: usize,
    pub latent_dim: usize,
    /// Encoder widths; the decoder mirrors them.
    pub hidden_dims: Vec<usize>,
    pub beta_kl: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_len: 1024,
            feature_len: 65,
            latent_dim: 32,
            hidden_dims: vec![512, 128],
            beta_kl: 1e-3,
            learning_rate: 1e-3,
            epochs: 120,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims_ok = self.input_len > 0
            && self.latent_dim > 0
            && self.batch_size > 0
            && self.hidden_dims.iter().all(|&h| h > 0);
        if !dims_ok {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.beta_kl >= 0.0 && self.learning_rate > 0.0) {
            return Err(Error::Config("beta_kl must be ≥ 0 and learning_rate > 0".into()));
        }
        Ok(())
    }

    /// Encoder input width.
    pub fn encoder_input_len(&self) -> usize {
        self.input_len + self.feature_len
    }
}

/// What the model transfers from and to, and how inputs are conditioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Conditioning<T: Real> {
    pub prior: PeakKind,
    pub k_max: usize,
    pub source_modality: Modality,
    pub source_grid: GridSpec<T>,
    pub target_modality: Modality,
    pub target_grid: GridSpec<T>,
}

impl<T: Real> Conditioning<T> {
    pub fn feature_len(&self) -> usize {
        4 * self.k_max + 1
    }

    fn check(&self, cfg: &ModelConfig) -> Result<()> {
        self.source_grid.validate()?;
        self.target_grid.validate()?;
        if self.source_grid.n_points != cfg.input_len || self.target_grid.n_points != cfg.input_len {
            return Err(Error::Config(format!(
                "grids must have input_len = {} points (source {}, target {})",
                cfg.input_len, self.source_grid.n_points, self.target_grid.n_points
            )));
        }
        if self.feature_len() != cfg.feature_len {
            return Err(Error::Config(format!(
                "feature_len {} does not match 4·k_max+1 = {}",
                cfg.feature_len,
                self.feature_len()
            )));
        }
        Ok(())
    }
}

/// Encoder parameters `φ`, decoder parameters `θ` and their configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GenerativeModel<T: Real> {
    pub phi: Encoder<T>,
    pub theta: Decoder<T>,
    pub config: ModelConfig,
    pub conditioning: Conditioning<T>,
}

/// One reparameterized latent draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample<T> {
    pub mu: Vec<T>,
    pub log_var: Vec<T>,
    pub z: Vec<T>,
    /// The standard-normal draw used for `z`.
    pub eps: Vec<T>,
}

/// Loss terms averaged over a batch.
///
/// `recon` is the squared error of a whole spectrum (summed over the grid),
/// `kl` the divergence summed over latent dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LossParts<T: Real> {
    pub total: T,
    pub recon: T,
    pub kl: T,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone)]
pub struct Gradients<T: Real> {
    pub phi: Encoder<T>,
    pub theta: Decoder<T>,
}

impl<T: Real> Gradients<T> {
    pub(crate) fn tensors(&self) -> Vec<&[T]> {
        let mut t = self.phi.tensors();
        t.extend(self.theta.tensors());
        t
    }

    /// Same order as [`GenerativeModel::parameters`].
    pub fn flatten(&self) -> Vec<T> {
        self.tensors().concat()
    }
}

impl<T: Real> GenerativeModel<T> {
    /// Freshly initialized model: fan-in uniform weights from the seeded
    /// `model-init` stream, zero biases and a zero `log σ²` head.
    pub fn new(config: ModelConfig, conditioning: Conditioning<T>) -> Result<Self> {
        config.validate()?;
        conditioning.check(&config)?;
        let mut rng = stream_rng(config.seed, "model-init");
        let phi = Encoder::new(config.encoder_input_len(), &config.hidden_dims, config.latent_dim, &mut rng);
        let mirrored: Vec<usize> = config.hidden_dims.iter().rev().copied().collect();
        let theta = Decoder::new(config.latent_dim, &mirrored, config.input_len, &mut rng);
        Ok(GenerativeModel { phi, theta, config, conditioning })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.conditioning.check(&self.config)?;
        if self.phi.input_len() != self.config.encoder_input_len()
            || self.theta.latent_len() != self.config.latent_dim
            || self.theta.output.n_out() != self.config.input_len
        {
            return Err(Error::Config("layer shapes disagree with the model config".into()));
        }
        if !(self.phi.is_finite() && self.theta.is_finite()) {
            return Err(Error::Numerical("model parameters are not finite".into()));
        }
        Ok(())
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t = self.phi.tensors_mut();
        t.extend(self.theta.tensors_mut());
        t
    }

    pub(crate) fn tensors(&self) -> Vec<&[T]> {
        let mut t = self.phi.tensors();
        t.extend(self.theta.tensors());
        t
    }

    /// Every weight and bias, encoder first, layer by layer.
    pub fn parameters(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn set_parameters(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.n_parameters() {
            return Err(Error::Input(format!("expected {} parameters, got {}", self.n_parameters(), values.len())));
        }
        let mut rest = values;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Encoder input: spectrum intensities followed by deconstruction features.
    pub fn encoder_input(&self, spectrum: &Spectrum<T>, d: &Deconstruction<T>) -> Result<Vec<T>> {
        let c = &self.conditioning;
        if !c.source_grid.matches(spectrum.axis()) {
            return Err(Error::Config("input spectrum is not on the model's source grid".into()));
        }
        if d.prior_kind != c.prior {
            return Err(Error::Config(format!(
                "deconstruction uses the {} prior but the model expects {}",
                d.prior_kind, c.prior
            )));
        }
        let mut x = spectrum.intensity().to_vec();
        x.extend(deconstruction_features(d, c.k_max));
        Ok(x)
    }

    /// Posterior parameters `(μ, log σ²)` of `q_φ(z|x)`.
    pub fn encode(&self, x: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let expected = self.config.encoder_input_len();
        if x.len() != expected {
            return Err(Error::Input(format!("encoder expects {expected} values, got {}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("encoder input contains non-finite values".into()));
        }
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let tape = self.phi.forward(view);
        Ok((tape.mu.row(0).to_vec(), tape.log_var.row(0).to_vec()))
    }

    /// Mean of `p_θ(y|z)`, each value in `[0, 1]`.
    pub fn decode(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.config.latent_dim {
            return Err(Error::Input(format!(
                "decoder expects {} latent values, got {}",
                self.config.latent_dim,
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("latent vector contains non-finite values".into()));
        }
        let view = ArrayView2::from_shape((1, z.len()), z).expect("row vector");
        Ok(self.theta.forward(view).output.row(0).to_vec())
    }

    /// Batch loss for rows of `x` (encoder inputs), `y` (targets) and the
    /// standard-normal draws `eps`.
    pub fn loss_with_noise(&self, x: ArrayView2<T>, y: ArrayView2<T>, eps: ArrayView2<T>) -> LossParts<T> {
        self.forward_backward(x, y, eps, false).0
    }

    /// Batch loss and its exact gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        x: ArrayView2<T>,
        y: ArrayView2<T>,
        eps: ArrayView2<T>,
    ) -> (LossParts<T>, Gradients<T>) {
        let (parts, grads) = self.forward_backward(x, y, eps, true);
        (parts, grads.expect("gradients requested"))
    }

    fn forward_backward(
        &self,
        x: ArrayView2<T>,
        y: ArrayView2<T>,
        eps: ArrayView2<T>,
        with_grad: bool,
    ) -> (LossParts<T>, Option<Gradients<T>>) {
        let batch = T::from_usize_lossy(x.nrows());
        let beta = T::lit(self.config.beta_kl);
        let half = T::lit(0.5);

        let enc = self.phi.forward(x);
        let std = enc.log_var.mapv(|v| (v * half).exp());
        let z = &enc.mu + &(&std * &eps);
        let dec = self.theta.forward(z.view());

        let diff = &dec.output - &y;
        let recon = diff.iter().map(|&d| d * d).sum::<T>() / batch;
        let kl_rows = kl_rows(&enc.mu, &enc.log_var);
        let kl = kl_rows.iter().copied().sum::<T>() / batch;
        let parts = LossParts { total: recon + beta * kl, recon, kl };
        if !with_grad {
            return (parts, None);
        }

        let mut grads = Gradients { phi: self.phi.zeros_like(), theta: self.theta.zeros_like() };
        let d_output = diff.mapv(|d| d * T::lit(2.0) / batch);
        let d_z = self.theta.backward(&dec, &d_output, &mut grads.theta);
        let d_mu = &d_z + &enc.mu.mapv(|m| beta * m / batch);
        let d_log_var = ndarray::Zip::from(&d_z)
            .and(&eps)
            .and(&std)
            .and(&enc.log_var)
            .map_collect(|&dz, &e, &s, &lv| dz * e * s * half + beta * half * (lv.exp() - T::one()) / batch);
        self.phi.backward(&enc, &d_mu, &d_log_var, &mut grads.phi);
        (parts, Some(grads))
    }

    /// Posterior means for a batch of encoder inputs (rows).
    pub fn posterior_means(&self, x: ArrayView2<T>) -> Array2<T> {
        self.phi.forward(x).mu
    }

    /// Generates the modality-B spectrum for `s_a` using `z = μ`.
    pub fn generate(&self, s_a: &Spectrum<T>, d: &Deconstruction<T>) -> Result<Spectrum<T>> {
        let x = self.encoder_input(s_a, d)?;
        let (mu, _) = self.encode(&x)?;
        let y = self.decode(&mu)?;
        let c = &self.conditioning;
        let mut out = Spectrum::on_grid(&c.target_grid, y, c.target_modality)?;
        out.label = s_a.label.clone();
        normalize_minmax(&out)
    }
}

fn kl_rows<T: Real>(mu: &Array2<T>, log_var: &Array2<T>) -> Vec<T> {
    mu.axis_iter(Axis(0))
        .zip(log_var.axis_iter(Axis(0)))
        .map(|(m, l)| kl_divergence(m.as_slice().expect("row"), l.as_slice().expect("row")))
        .collect()
}

/// `KL(N(μ, σ²) ‖ N(0, I)) = Σ ½(μ² + σ² − 1 − log σ²)`.
pub fn kl_divergence<T: Real>(mu: &[T], log_var: &[T]) -> T {
    let half = T::lit(0.5);
    mu.iter()
        .zip(log_var)
        .map(|(&m, &lv)| half * (m * m + lv.exp() - T::one() - lv))
        .sum()
}

/// `z = μ + exp(log σ² / 2) ⊙ ε` with `ε ~ N(0, I)` drawn from `rng`.
pub fn reparameterize<T: Real, R: Rng>(mu: &[T], log_var: &[T], rng: &mut R) -> LatentSample<T> {
    let eps: Vec<T> = (0..mu.len()).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
    reparameterize_with(mu, log_var, &eps)
}

/// Reparameterization with an explicit noise draw.
pub fn reparameterize_with<T: Real>(mu: &[T], log_var: &[T], eps: &[T]) -> LatentSample<T> {
    let half = T::lit(0.5);
    let z = mu
        .iter()
        .zip(log_var)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + (lv * half).exp() * e)
        .collect();
    LatentSample { mu: mu.to_vec(), log_var: log_var.to_vec(), z, eps: eps.to_vec() }
}

/// Standard-normal noise matrix from `rng`.
pub(crate) fn noise_matrix<T: Real, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.sample::<f64, _>(StandardNormal)))
}

#[cfg(test)]
pub(crate) mod tests;
