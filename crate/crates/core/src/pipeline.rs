//! The workflows behind each CLI subcommand. Every step writes into its own
//! output directory and leaves a `run.json` record of the seed, the config
//! hash and the derived random streams.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::manifest::{assign_split, ManifestEntry, PairManifest, Split};
use crate::data::rruff::{read_rruff, write_rruff, RruffRecord};
use crate::data::synth::generate_synthetic_pairs;
use crate::deconstruct::{fit_deconstruction, Deconstruction};
use crate::error::{Error, Result};
use crate::eval::{build_dataset_report, DatasetReport, EvalPair};
use crate::genmodel::{checkpoint, train_with_observer, Conditioning, EpochLoss, GenerativeModel};
use crate::latent::{capture_latents, compare_runs, LatentTrace, PriorSwapAnalysis};
use crate::lineshape::{PeakKind, PeakModel};
use crate::plot;
use crate::seeds::stream_seed;
use crate::spectrum::{normalize_minmax, resample, Modality, Spectrum};
use crate::transfer::{generate_from, prepare_source, prepare_target, training_pair, PreparedSource};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const GENERATED_MANIFEST_FILE: &str = "generated.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LATENTS_FILE: &str = "latents.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_FILE: &str = "run.json";

/// Training epochs between latent captures; the final epoch is always kept.
pub const LATENT_EVERY: usize = 10;
/// Overlay plots written by `evaluate`.
const MAX_OVERLAYS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Stream name to derived 64-bit seed.
    pub streams: BTreeMap<String, u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunRecord {
    fn new(command: &str, cfg: &RunConfig, streams: &[&str]) -> Result<Self> {
        Ok(RunRecord {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: cfg.seed,
            config_sha256: cfg.hash()?,
            streams: streams.iter().map(|s| (s.to_string(), stream_seed(cfg.seed, s))).collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn write(mut self, out_dir: &Path, outputs: &[&str]) -> Result<()> {
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        write_json(&out_dir.join(RUN_FILE), &self)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

/// File-system safe version of a sample name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn conditioning_for(cfg: &RunConfig, prior: PeakKind, a: Modality, b: Modality) -> Conditioning<f64> {
    Conditioning {
        prior,
        k_max: cfg.k_max,
        source_modality: a,
        source_grid: cfg.grids.for_modality(a),
        target_modality: b,
        target_grid: cfg.grids.for_modality(b),
    }
}

/// The single `(modality A, modality B)` pair used by every manifest entry.
fn manifest_modalities(m: &PairManifest) -> Result<(Modality, Modality)> {
    let first = m.entries.first().ok_or_else(|| Error::Input("manifest is empty".into()))?;
    let pair = (first.modality_a, first.modality_b);
    if m.entries.iter().any(|e| (e.modality_a, e.modality_b) != pair) {
        return Err(Error::Input("manifest mixes modality pairs; use one manifest per pair".into()));
    }
    Ok(pair)
}

// ---------------------------------------------------------------- synth

/// Ground-truth peaks written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPeaks {
    pub name: String,
    pub peaks_a: Vec<PeakModel<f64>>,
    pub peaks_b: Vec<PeakModel<f64>>,
}

/// Writes `a/`, `b/`, `manifest.csv` and `truth_peaks.json` into `out_dir`.
pub fn synth(cfg: &RunConfig, out_dir: &Path) -> Result<PairManifest> {
    let spec = &cfg.synth;
    let grid_a = cfg.grids.for_modality(spec.modality_a);
    let grid_b = cfg.grids.for_modality(spec.modality_b);
    let pairs = generate_synthetic_pairs(spec, &grid_a, &grid_b)?;
    create_dir(out_dir)?;
    let mut entries = Vec::with_capacity(pairs.len());
    let mut truth = Vec::with_capacity(pairs.len());
    for p in pairs {
        let file = format!("{}.txt", file_stem(&p.name));
        let rel_a = PathBuf::from("a").join(&file);
        let rel_b = PathBuf::from("b").join(&file);
        write_rruff(&out_dir.join(&rel_a), &RruffRecord::new(&p.name, p.a))?;
        write_rruff(&out_dir.join(&rel_b), &RruffRecord::new(&p.name, p.b))?;
        entries.push(ManifestEntry {
            name: p.name.clone(),
            path_a: rel_a,
            modality_a: spec.modality_a,
            path_b: rel_b,
            modality_b: spec.modality_b,
            split: Split::Train,
            class: None,
        });
        truth.push(TruthPeaks { name: p.name, peaks_a: p.peaks_a, peaks_b: p.peaks_b });
    }
    assign_split(&mut entries, cfg.test_fraction, cfg.seed)?;
    let manifest = PairManifest { entries };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    write_json(&out_dir.join("truth_peaks.json"), &truth)?;
    RunRecord::new("synth", cfg, &["synth-peaks", "synth-noise", "manifest-split"])?
        .write(out_dir, &["a/", "b/", MANIFEST_FILE, "truth_peaks.json"])?;
    log::info!("wrote {} synthetic pairs to {}", manifest.entries.len(), out_dir.display());
    Ok(manifest)
}

// ---------------------------------------------------------------- fit

/// Deconstruction summary without the residual trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub modality: Modality,
    pub prior_kind: PeakKind,
    pub peaks: Vec<PeakModel<f64>>,
    pub rmse_fit: f64,
    pub n_iterations: usize,
    pub converged: bool,
}

impl FitRecord {
    fn new(name: &str, modality: Modality, d: &Deconstruction<f64>) -> Self {
        FitRecord {
            name: name.to_string(),
            modality,
            prior_kind: d.prior_kind,
            peaks: d.peaks.clone(),
            rmse_fit: d.rmse_fit,
            n_iterations: d.n_iterations,
            converged: d.converged,
        }
    }
}

/// Which spectrum of each manifest pair to process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Resamples `raw` onto the canonical grid of its modality, normalizes and
/// fits it. With `strict`, a fit that did not converge is a numerical error.
pub fn fit_one(cfg: &RunConfig, name: &str, raw: &Spectrum<f64>, prior: PeakKind, strict: bool) -> Result<FitRecord> {
    let s = normalize_minmax(&resample(raw, &cfg.grids.for_modality(raw.modality))?)?;
    let d = fit_deconstruction(&s, prior, &cfg.fit)?;
    if strict && !d.converged {
        return Err(Error::Numerical(format!("fit of {name} did not converge in {} iterations", d.n_iterations)));
    }
    Ok(FitRecord::new(name, raw.modality, &d))
}

/// Fits one side of every manifest entry and writes `fits.json`.
pub fn fit_manifest(
    cfg: &RunConfig,
    manifest: &PairManifest,
    side: Side,
    prior: PeakKind,
    strict: bool,
    out_dir: &Path,
) -> Result<Vec<FitRecord>> {
    let mut records = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let (path, modality) = match side {
            Side::A => (&e.path_a, e.modality_a),
            Side::B => (&e.path_b, e.modality_b),
        };
        let raw = read_rruff(path, modality)?.spectrum;
        records.push(fit_one(cfg, &e.name, &raw, prior, strict)?);
    }
    write_fits(cfg, &records, out_dir)?;
    Ok(records)
}

pub fn write_fits(cfg: &RunConfig, records: &[FitRecord], out_dir: &Path) -> Result<()> {
    write_json(&out_dir.join("fits.json"), &records)?;
    RunRecord::new("fit", cfg, &[])?.write(out_dir, &["fits.json"])
}

// ---------------------------------------------------------------- train

pub struct TrainOutcome {
    pub model: GenerativeModel<f64>,
    pub history: Vec<EpochLoss>,
    pub traces: Vec<LatentTrace>,
}

struct PreparedEntry {
    name: String,
    split: Split,
    source: PreparedSource<f64>,
    target: Spectrum<f64>,
}

fn prepare_manifest(cfg: &RunConfig, manifest: &PairManifest, cond: &Conditioning<f64>) -> Result<Vec<PreparedEntry>> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let a = read_rruff(&e.path_a, e.modality_a)?.spectrum;
            let b = read_rruff(&e.path_b, e.modality_b)?.spectrum;
            Ok(PreparedEntry {
                name: e.name.clone(),
                split: e.split,
                source: prepare_source(&a, cond, &cfg.fit)?,
                target: prepare_target(&b, cond)?,
            })
        })
        .collect()
}

/// Trains on the manifest's train split. Latent traces over every entry are
/// captured each [`LATENT_EVERY`] epochs and at the end.
pub fn train(cfg: &RunConfig, manifest: &PairManifest, prior: PeakKind, run_id: &str, out_dir: &Path) -> Result<TrainOutcome> {
    let (ma, mb) = manifest_modalities(manifest)?;
    let cond = conditioning_for(cfg, prior, ma, mb);
    let prepared = prepare_manifest(cfg, manifest, &cond)?;
    let inputs: Vec<(Vec<f64>, Vec<f64>)> =
        prepared.iter().map(|p| training_pair(&p.source, &p.target, &cond)).collect();
    let data: Vec<(Vec<f64>, Vec<f64>)> = prepared
        .iter()
        .zip(&inputs)
        .filter(|(p, _)| p.split == Split::Train)
        .map(|(_, d)| d.clone())
        .collect();
    if data.is_empty() {
        return Err(Error::Input("manifest has no training entries".into()));
    }
    let enc_inputs: Vec<Vec<f64>> = inputs.into_iter().map(|(x, _)| x).collect();
    let names: Vec<String> = prepared.iter().map(|p| p.name.clone()).collect();
    let epochs = cfg.model.epochs;
    let mut traces = Vec::new();
    let mut capture_err = None;
    let trained = train_with_observer(&data, &cfg.model, &cond, |epoch, model| {
        if epoch % LATENT_EVERY == 0 || epoch == epochs {
            match capture_latents(model, &enc_inputs, &names, run_id, epoch) {
                Ok(t) => traces.push(t),
                Err(e) => capture_err = Some(e),
            }
        }
    })?;
    if let Some(e) = capture_err {
        return Err(e);
    }

    create_dir(out_dir)?;
    checkpoint::save(&trained.model, out_dir.join(CHECKPOINT_FILE))?;
    let mut csv = String::from("epoch,total,recon,kl\n");
    for h in &trained.history {
        csv.push_str(&format!("{},{},{},{}\n", h.epoch, h.total, h.recon, h.kl));
    }
    write_text(&out_dir.join("history.csv"), &csv)?;
    write_json(&out_dir.join(LATENTS_FILE), &traces)?;
    let ep: Vec<f64> = trained.history.iter().map(|h| h.epoch as f64).collect();
    let total: Vec<f64> = trained.history.iter().map(|h| h.total.max(f64::MIN_POSITIVE).log10()).collect();
    write_text(&out_dir.join("loss.svg"), &plot::line_chart("log10 training loss", &[("total", &ep, &total)]))?;
    RunRecord::new("train", cfg, &["model-init", "train-shuffle", "train-noise"])?
        .write(out_dir, &[CHECKPOINT_FILE, "history.csv", LATENTS_FILE, "loss.svg"])?;
    Ok(TrainOutcome { model: trained.model, history: trained.history, traces })
}

// ---------------------------------------------------------------- generate

/// Generates modality-B spectra for the chosen entries (the test split unless
/// `all`). Writes `generated/` and a `generated.csv` manifest whose B paths
/// point at the generated files.
pub fn generate(
    cfg: &RunConfig,
    model: &GenerativeModel<f64>,
    manifest: &PairManifest,
    all: bool,
    out_dir: &Path,
) -> Result<PairManifest> {
    let cond = &model.conditioning;
    let mut entries = Vec::new();
    for e in manifest.entries.iter().filter(|e| all || e.split == Split::Test) {
        if e.modality_a != cond.source_modality {
            return Err(Error::Input(format!(
                "{}: model expects {} input, manifest gives {}",
                e.name, cond.source_modality, e.modality_a
            )));
        }
        let raw = read_rruff(&e.path_a, e.modality_a)?.spectrum;
        let source = prepare_source(&raw, cond, &cfg.fit)?;
        let generated = generate_from(model, &source)?;
        let rel = PathBuf::from("generated").join(format!("{}.txt", file_stem(&e.name)));
        write_rruff(&out_dir.join(&rel), &RruffRecord::generated(&e.name, generated, cond.prior))?;
        entries.push(ManifestEntry {
            path_a: absolute(&e.path_a),
            path_b: rel,
            modality_b: cond.target_modality,
            ..e.clone()
        });
    }
    if entries.is_empty() {
        return Err(Error::Input("no manifest entries selected for generation".into()));
    }
    let mut out = PairManifest { entries };
    out.save(&out_dir.join(GENERATED_MANIFEST_FILE))?;
    RunRecord::new("generate", cfg, &[])?.write(out_dir, &["generated/", GENERATED_MANIFEST_FILE])?;
    // the saved manifest is relative to out_dir; the returned one is usable as is
    for e in &mut out.entries {
        e.path_b = out_dir.join(&e.path_b);
    }
    Ok(out)
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

// ---------------------------------------------------------------- evaluate

/// Matches generated spectra to their ground truth by name, both resampled
/// onto the canonical grid of the target modality.
pub fn evaluation_pairs(cfg: &RunConfig, generated: &PairManifest, truth: &PairManifest) -> Result<Vec<EvalPair>> {
    if generated.entries.is_empty() {
        return Err(Error::Input("generated manifest is empty".into()));
    }
    generated
        .entries
        .iter()
        .map(|g| {
            let t = truth
                .get(&g.name)
                .ok_or_else(|| Error::Input(format!("`{}` is not in the truth manifest", g.name)))?;
            if t.modality_b != g.modality_b {
                return Err(Error::Input(format!(
                    "`{}`: generated {} vs truth {}",
                    g.name, g.modality_b, t.modality_b
                )));
            }
            let grid = cfg.grids.for_modality(g.modality_b);
            let on_grid = |path: &Path| -> Result<Spectrum<f64>> {
                let s = read_rruff(path, g.modality_b)?.spectrum;
                normalize_minmax(&resample(&s, &grid)?)
            };
            Ok(EvalPair {
                name: g.name.clone(),
                generated: on_grid(&g.path_b)?,
                truth: on_grid(&t.path_b)?,
                class: t.class.clone(),
            })
        })
        .collect()
}

/// Builds the report, writes `report.json` and plots.
pub fn evaluate(cfg: &RunConfig, generated: &PairManifest, truth: &PairManifest, out_dir: &Path) -> Result<DatasetReport> {
    let pairs = evaluation_pairs(cfg, generated, truth)?;
    let report = build_dataset_report(&pairs, &cfg.evaluate)?;
    create_dir(out_dir)?;
    write_text(&out_dir.join(REPORT_FILE), &report.to_json()?)?;
    let mut outputs = vec![REPORT_FILE.to_string()];
    for p in pairs.iter().take(MAX_OVERLAYS) {
        let file = format!("overlay_{}.svg", file_stem(&p.name));
        let svg = plot::line_chart(
            &p.name,
            &[("generated", p.generated.axis(), p.generated.intensity()), ("truth", p.truth.axis(), p.truth.intensity())],
        );
        write_text(&out_dir.join(&file), &svg)?;
        outputs.push(file);
    }
    let corr: Vec<f64> = report.pairs.iter().filter_map(|r| r.metrics.as_ref().map(|m| m.correlation)).collect();
    write_text(&out_dir.join("correlation_hist.svg"), &plot::histogram("correlation", &corr, 20))?;
    outputs.push("correlation_hist.svg".into());
    if let Some(c) = &report.classification {
        for (tag, result) in [("generated", &c.generated), ("truth", &c.truth)] {
            let n = result.classes.len();
            let mut total = vec![vec![0usize; n]; n];
            for r in &result.rounds {
                for (i, row) in r.confusion.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        total[i][j] += v;
                    }
                }
            }
            let file = format!("confusion_{tag}.svg");
            write_text(&out_dir.join(&file), &plot::heatmap(&format!("confusion ({tag})"), &result.classes, &total))?;
            outputs.push(file);
        }
    }
    let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    RunRecord::new("evaluate", cfg, &[])?.write(out_dir, &refs)?;
    Ok(report)
}

// ---------------------------------------------------------------- analyze

/// Loads the final-epoch latent trace from a trace file, a training output
/// directory, or a checkpoint (which needs `manifest` to encode inputs).
pub fn load_trace(cfg: &RunConfig, input: &Path, manifest: Option<&PairManifest>) -> Result<LatentTrace> {
    let path = if input.is_dir() { input.join(LATENTS_FILE) } else { input.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    if let Ok(traces) = serde_json::from_str::<Vec<LatentTrace>>(&text) {
        return traces
            .into_iter()
            .max_by_key(|t| t.epoch)
            .ok_or_else(|| Error::Input(format!("{}: no latent traces", path.display())));
    }
    if let Ok(trace) = serde_json::from_str::<LatentTrace>(&text) {
        return Ok(trace);
    }
    let model: GenerativeModel<f64> = checkpoint::from_str(&text)?;
    let manifest = manifest.ok_or_else(|| Error::Input("analyzing a checkpoint needs --manifest".into()))?;
    let prepared = prepare_manifest(cfg, manifest, &model.conditioning)?;
    let inputs: Vec<Vec<f64>> =
        prepared.iter().map(|p| training_pair(&p.source, &p.target, &model.conditioning).0).collect();
    let names: Vec<String> = prepared.iter().map(|p| p.name.clone()).collect();
    let run_id = path.display().to_string();
    capture_latents(&model, &inputs, &names, &run_id, model.config.epochs)
}

pub fn analyze(cfg: &RunConfig, a: &LatentTrace, b: &LatentTrace, out_dir: &Path) -> Result<PriorSwapAnalysis> {
    if a.sample_names != b.sample_names {
        return Err(Error::Input("latent traces cover different samples".into()));
    }
    let analysis = compare_runs(a, b, cfg.analyze.n_shuffles, cfg.seed)?;
    create_dir(out_dir)?;
    write_json(&out_dir.join("analysis.json"), &analysis)?;
    let (pa, pb) = analysis.pca.projections.split_at(analysis.n_a);
    let pts = |rows: &[Vec<f64>]| -> Vec<[f64; 2]> { rows.iter().map(|r| [r[0], r[1]]).collect() };
    let (pa, pb) = (pts(pa), pts(pb));
    let la = format!("{} ({})", a.run_id, a.prior_kind);
    let lb = format!("{} ({})", b.run_id, b.prior_kind);
    write_text(&out_dir.join("pca.svg"), &plot::scatter("latent PCA", &[(&la, &pa), (&lb, &pb)]))?;
    let cos: Vec<f64> = analysis.cosine_profile.iter().flatten().copied().collect();
    write_text(&out_dir.join("cosine_hist.svg"), &plot::histogram("cosine similarity", &cos, 20))?;
    RunRecord::new("analyze", cfg, &["permutation-test"])?
        .write(out_dir, &["analysis.json", "pca.svg", "cosine_hist.svg"])?;
    Ok(analysis)
}

/// `RunRecord` for commands whose inputs should be listed.
pub fn record_inputs(out_dir: &Path, inputs: &[&Path]) -> Result<()> {
    let path = out_dir.join(RUN_FILE);
    let mut rec: RunRecord = read_json(&path)?;
    rec.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
    write_json(&path, &rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("Quartz R040031/a"), "Quartz_R040031_a");
        assert_eq!(file_stem("synth_007"), "synth_007");
    }

    #[test]
    fn run_record_lists_stream_seeds() {
        let cfg = RunConfig::default();
        let rec = RunRecord::new("x", &cfg, &["train-noise"]).unwrap();
        assert_eq!(rec.streams["train-noise"], stream_seed(0, "train-noise"));
        assert_eq!(rec.config_sha256.len(), 64);
    }

    #[test]
    fn mixed_modalities_are_rejected() {
        let e = |m| ManifestEntry {
            name: format!("{m}"),
            path_a: "a".into(),
            modality_a: m,
            path_b: "b".into(),
            modality_b: Modality::Raman,
            split: Split::Train,
            class: None,
        };
        let m = PairManifest { entries: vec![e(Modality::Ir), e(Modality::Xrd)] };
        assert!(matches!(manifest_modalities(&m), Err(Error::Input(_))));
    }
}
