//! Glue between raw spectra, deconstruction and the generative model.

use crate::deconstruct::{fit_deconstruction, Deconstruction, FitConfig};
use crate::error::Result;
use crate::genmodel::{Conditioning, GenerativeModel};
use crate::scalar::Real;
use crate::spectrum::{normalize_minmax, resample, Spectrum};

/// A modality-A spectrum ready for the encoder: resampled, normalized and
/// deconstructed under the model's prior.
#[derive(Debug, Clone)]
pub struct PreparedSource<T: Real> {
    pub spectrum: Spectrum<T>,
    pub deconstruction: Deconstruction<T>,
}

pub fn prepare_source<T: Real>(
    raw: &Spectrum<T>,
    conditioning: &Conditioning<T>,
    fit: &FitConfig<T>,
) -> Result<PreparedSource<T>> {
    let mut spectrum = normalize_minmax(&resample(raw, &conditioning.source_grid)?)?;
    spectrum.modality = conditioning.source_modality;
    let deconstruction = fit_deconstruction(&spectrum, conditioning.prior, fit)?;
    Ok(PreparedSource { spectrum, deconstruction })
}

/// A modality-B spectrum resampled and normalized on the target grid.
pub fn prepare_target<T: Real>(raw: &Spectrum<T>, conditioning: &Conditioning<T>) -> Result<Spectrum<T>> {
    let mut s = normalize_minmax(&resample(raw, &conditioning.target_grid)?)?;
    s.modality = conditioning.target_modality;
    Ok(s)
}

/// Encoder input vector for a prepared source under `model`'s conditioning.
pub fn training_pair<T: Real>(
    model_input: &PreparedSource<T>,
    target: &Spectrum<T>,
    conditioning: &Conditioning<T>,
) -> (Vec<T>, Vec<T>) {
    let mut x = model_input.spectrum.intensity().to_vec();
    x.extend(crate::deconstruct::deconstruction_features(&model_input.deconstruction, conditioning.k_max));
    (x, target.intensity().to_vec())
}

/// Generates the target spectrum for a prepared source.
pub fn generate_from<T: Real>(model: &GenerativeModel<T>, source: &PreparedSource<T>) -> Result<Spectrum<T>> {
    model.generate(&source.spectrum, &source.deconstruction)
}
