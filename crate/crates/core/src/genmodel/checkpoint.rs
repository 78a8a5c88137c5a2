//! Versioned JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenerativeModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "spectral-transfer-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct Checkpoint<T: Real> {
    format: String,
    version: u32,
    scalar: String,
    seed: u64,
    model: GenerativeModel<T>,
}

fn scalar_name<T: Real>() -> String {
    std::any::type_name::<T>().to_string()
}

pub fn to_string<T: Real>(model: &GenerativeModel<T>) -> Result<String> {
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        scalar: scalar_name::<T>(),
        seed: model.config.seed,
        model: model.clone(),
    };
    serde_json::to_string(&ckpt).map_err(|e| Error::Serde(e.to_string()))
}

pub fn from_str<T: Real>(text: &str) -> Result<GenerativeModel<T>> {
    let ckpt: Checkpoint<T> = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Serde(format!(
            "unsupported checkpoint {} v{}",
            ckpt.format, ckpt.version
        )));
    }
    if ckpt.scalar != scalar_name::<T>() {
        return Err(Error::Serde(format!(
            "checkpoint holds {} parameters, requested {}",
            ckpt.scalar,
            scalar_name::<T>()
        )));
    }
    ckpt.model.validate()?;
    Ok(ckpt.model)
}

pub fn save<T: Real>(model: &GenerativeModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let text = to_string(model)?;
    std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<GenerativeModel<T>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    from_str(&text)
}
