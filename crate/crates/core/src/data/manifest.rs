//! Cross-modality pairing of spectrum files and the train/test split.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::rruff::{normalize_name, read_rruff, NAME_KEY};
use crate::error::{Error, Result};
use crate::seeds::stream_rng;
use crate::spectrum::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path_a: PathBuf,
    pub modality_a: Modality,
    pub path_b: PathBuf,
    pub modality_b: Modality,
    pub split: Split,
    /// Optional class label for the classification test.
    #[serde(default)]
    pub class: Option<String>,
}

/// Paired files, sorted by name. Relative paths are taken relative to the
/// manifest file's directory when loaded from disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairManifest {
    pub entries: Vec<ManifestEntry>,
}

impl PairManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if e.name.trim().is_empty() {
                return Err(Error::Input("manifest entry with empty name".into()));
            }
            for m in [e.modality_a, e.modality_b] {
                if !seen.insert((normalize_name(&e.name), m)) {
                    return Err(Error::Input(format!("duplicate manifest entry ({}, {m})", e.name)));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn get(&self, name: &str) -> Option<&ManifestEntry> {
        let key = normalize_name(name);
        self.entries.iter().find(|e| normalize_name(&e.name) == key)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).map_err(|e| Error::Serde(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (i, row) in r.deserialize().enumerate() {
            let entry: ManifestEntry = row.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
            entries.push(entry);
        }
        let m = PairManifest { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = PairManifest::from_csv(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.entries {
            if e.path_a.is_relative() {
                e.path_a = base.join(&e.path_a);
            }
            if e.path_b.is_relative() {
                e.path_b = base.join(&e.path_b);
            }
        }
        Ok(m)
    }
}

/// Assigns `round(test_fraction · n)` entries to the test split using the
/// `manifest-split` stream. Entries keep their order.
pub fn assign_split(entries: &mut [ManifestEntry], test_fraction: f64, seed: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Config(format!("test_fraction must be in [0, 1], got {test_fraction}")));
    }
    let n_test = (test_fraction * entries.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.shuffle(&mut stream_rng(seed, "manifest-split"));
    for (rank, &i) in order.iter().enumerate() {
        entries[i].split = if rank < n_test { Split::Test } else { Split::Train };
    }
    Ok(())
}

/// Reads every file in `dir` and indexes it by normalized sample name.
/// Unreadable files and repeated names are logged and skipped; the first
/// file in filename order wins.
fn index_dir(dir: &Path, modality: Modality) -> Result<BTreeMap<String, (String, PathBuf)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut out: BTreeMap<String, (String, PathBuf)> = BTreeMap::new();
    for path in paths {
        let record = match read_rruff(&path, modality) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let Some(name) = record.metadata.get(NAME_KEY).filter(|n| !n.trim().is_empty()) else {
            log::warn!("skipping {}: no {NAME_KEY} header", path.display());
            continue;
        };
        let key = normalize_name(name);
        if let Some((_, first)) = out.get(&key) {
            log::info!("skipping {}: name `{name}` already taken by {}", path.display(), first.display());
            continue;
        }
        out.insert(key, (name.trim().to_string(), path));
    }
    Ok(out)
}

pub fn build_manifest(
    dir_a: &Path,
    dir_b: &Path,
    modality_a: Modality,
    modality_b: Modality,
    test_fraction: f64,
    seed: u64,
) -> Result<PairManifest> {
    let a = index_dir(dir_a, modality_a)?;
    let b = index_dir(dir_b, modality_b)?;
    for (key, (_, path)) in &a {
        if !b.contains_key(key) {
            log::info!("unmatched {modality_a} file {}", path.display());
        }
    }
    for (key, (_, path)) in &b {
        if !a.contains_key(key) {
            log::info!("unmatched {modality_b} file {}", path.display());
        }
    }
    let mut entries: Vec<ManifestEntry> = a
        .iter()
        .filter_map(|(key, (name, path_a))| {
            b.get(key).map(|(_, path_b)| ManifestEntry {
                name: name.clone(),
                path_a: path_a.clone(),
                modality_a,
                path_b: path_b.clone(),
                modality_b,
                split: Split::Train,
                class: None,
            })
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "no sample names shared between {} and {}",
            dir_a.display(),
            dir_b.display()
        )));
    }
    assign_split(&mut entries, test_fraction, seed)?;
    Ok(PairManifest { entries })
}
