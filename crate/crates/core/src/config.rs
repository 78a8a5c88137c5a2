//! Run configuration read from a TOML file.
//!
//! ```toml
//! seed = 7
//! prior = "gaussian"
//!
//! [grids.ir]
//! start = 400.0
//! end = 4000.0
//! n_points = 1024
//!
//! [model]
//! epochs = 60
//! ```
//!
//! Every section is optional. The top-level `seed` overrides the seeds of
//! the model, the synthetic dataset and the classifier, so a run is fixed by
//! one number.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deconstruct::FitConfig;
use crate::error::{Error, Result};
use crate::eval::ReportConfig;
use crate::genmodel::ModelConfig;
use crate::lineshape::PeakKind;
use crate::data::SynthSpec;
use crate::spectrum::{GridSpec, Modality};

/// Canonical grid per modality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub ir: GridSpec<f64>,
    pub raman: GridSpec<f64>,
    pub xrd: GridSpec<f64>,
    pub other: GridSpec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        let g = |start, end| GridSpec { start, end, n_points: 1024 };
        Grids {
            ir: g(400.0, 4000.0),
            raman: g(100.0, 1500.0),
            xrd: g(5.0, 90.0),
            other: g(0.0, 1000.0),
        }
    }
}

impl Grids {
    pub fn for_modality(&self, m: Modality) -> GridSpec<f64> {
        match m {
            Modality::Ir => self.ir,
            Modality::Raman => self.raman,
            Modality::Xrd => self.xrd,
            Modality::Other => self.other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeConfig {
    pub n_shuffles: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig { n_shuffles: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub prior: PeakKind,
    pub test_fraction: f64,
    /// Peaks kept in the conditioning features.
    pub k_max: usize,
    pub grids: Grids,
    pub fit: FitConfig<f64>,
    pub model: ModelConfig,
    pub synth: SynthSpec,
    pub evaluate: ReportConfig,
    pub analyze: AnalyzeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            prior: PeakKind::Gaussian,
            test_fraction: 0.2,
            k_max: 16,
            grids: Grids::default(),
            fit: FitConfig::default(),
            model: ModelConfig::default(),
            synth: SynthSpec::default(),
            evaluate: ReportConfig::default(),
            analyze: AnalyzeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.set_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Propagates `seed` to every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.model.seed = seed;
        self.synth.seed = seed;
        self.evaluate.classifier.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        for m in Modality::ALL {
            self.grids.for_modality(m).validate()?;
        }
        self.fit.validate()?;
        self.model.validate()?;
        self.synth.validate()?;
        self.evaluate.classifier.validate()?;
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::Config("test_fraction must be in [0, 1]".into()));
        }
        if self.k_max == 0 || 4 * self.k_max + 1 != self.model.feature_len {
            return Err(Error::Config(format!(
                "model.feature_len must equal 4·k_max+1 = {}",
                4 * self.k_max + 1
            )));
        }
        if self.evaluate.js_bins == 0 {
            return Err(Error::Config("evaluate.js_bins must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
