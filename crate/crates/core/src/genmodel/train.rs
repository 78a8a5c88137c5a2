//! Mini-batch training with adaptive moment estimation.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{noise_matrix, Conditioning, GenerativeModel, ModelConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeds::stream_rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Batch-weighted mean loss terms of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel<T: Real> {
    pub model: GenerativeModel<T>,
    pub history: Vec<EpochLoss>,
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
    lr: T,
}

impl<T: Real> Adam<T> {
    fn new(shapes: &[&[T]], lr: f64) -> Self {
        Adam {
            m: shapes.iter().map(|t| vec![T::zero(); t.len()]).collect(),
            v: shapes.iter().map(|t| vec![T::zero(); t.len()]).collect(),
            step: 0,
            lr: T::lit(lr),
        }
    }

    fn update(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>) {
        self.step += 1;
        let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(ADAM_EPS));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Trains a model on `(encoder input, target)` pairs.
pub fn train<T: Real>(
    dataset: &[(Vec<T>, Vec<T>)],
    config: &ModelConfig,
    conditioning: &Conditioning<T>,
) -> Result<TrainedModel<T>> {
    train_with_observer(dataset, config, conditioning, |_, _| {})
}

/// Like [`train`], calling `observer(epoch, model)` after every epoch.
///
/// Shuffling and reparameterization noise come from named streams of
/// `config.seed`, so two runs with the same inputs are bitwise identical.
pub fn train_with_observer<T: Real, F>(
    dataset: &[(Vec<T>, Vec<T>)],
    config: &ModelConfig,
    conditioning: &Conditioning<T>,
    mut observer: F,
) -> Result<TrainedModel<T>>
where
    F: FnMut(usize, &GenerativeModel<T>),
{
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let mut model = GenerativeModel::new(config.clone(), conditioning.clone())?;
    let n_in = config.encoder_input_len();
    let n_out = config.input_len;
    for (i, (x, y)) in dataset.iter().enumerate() {
        if x.len() != n_in || y.len() != n_out {
            return Err(Error::Input(format!(
                "pair {i}: expected input {n_in} / target {n_out}, got {} / {}",
                x.len(),
                y.len()
            )));
        }
    }

    let mut shuffle_rng = stream_rng(config.seed, "train-shuffle");
    let mut noise_rng = stream_rng(config.seed, "train-noise");
    let mut adam = Adam::new(&model.tensors(), config.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut total, mut recon, mut kl) = (0.0, 0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let x = Array2::from_shape_fn((batch.len(), n_in), |(r, c)| dataset[batch[r]].0[c]);
            let y = Array2::from_shape_fn((batch.len(), n_out), |(r, c)| dataset[batch[r]].1[c]);
            let eps = noise_matrix(batch.len(), config.latent_dim, &mut noise_rng);
            let (parts, grads) = model.loss_and_gradient(x.view(), y.view(), eps.view());
            if !parts.total.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss at epoch {epoch}")));
            }
            let w = batch.len() as f64;
            total += parts.total.as_f64() * w;
            recon += parts.recon.as_f64() * w;
            kl += parts.kl.as_f64() * w;
            adam.update(model.tensors_mut(), grads.tensors());
        }
        let n = dataset.len() as f64;
        history.push(EpochLoss { epoch, total: total / n, recon: recon / n, kl: kl / n });
        observer(epoch, &model);
    }
    model.validate()?;
    Ok(TrainedModel { model, history })
}
