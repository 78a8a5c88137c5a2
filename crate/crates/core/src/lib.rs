//! Spectral line-shape deconvolution, prior-conditioned variational transfer
//! between spectroscopic modalities, and the metrics used to judge it.

pub mod config;
pub mod data;
pub mod deconstruct;
pub mod error;
pub mod eval;
pub mod faddeeva;
pub mod genmodel;
pub mod latent;
pub mod lineshape;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod scalar;
pub mod seeds;
pub mod spectrum;
pub mod transfer;
mod serde_special;

pub use error::{Error, Result};
pub use lineshape::{PeakKind, PeakModel};
pub use scalar::Real;
pub use spectrum::{GridSpec, Modality, Spectrum};
