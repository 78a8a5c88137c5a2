//! Ingestion, pairing, synthetic datasets and run configuration.

pub mod manifest;
pub mod rruff;
pub mod synth;

pub use manifest::{build_manifest, ManifestEntry, PairManifest, Split};
pub use rruff::{parse_rruff, read_rruff, write_rruff, RruffRecord};
pub use synth::{generate_synthetic_pairs, MappingRule, SynthSpec, SyntheticPair};
