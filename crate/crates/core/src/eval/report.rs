//! Dataset-level evaluation report.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::classify::{classify_information_transfer, ClassificationResult, ClassifierConfig};
use super::js::{js_divergence, DEFAULT_BINS};
use super::metrics::{pair_metrics, PairMetrics};
use super::stats::{measure_stats, SpectrumStats};
use crate::deconstruct::FitConfig;
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

pub const REPORT_FORMAT: &str = "spectral-transfer-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub fit: FitConfig<f64>,
    pub js_bins: usize,
    pub classifier: ClassifierConfig,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { fit: FitConfig::default(), js_bins: DEFAULT_BINS, classifier: ClassifierConfig::default() }
    }
}

/// One generated spectrum with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub name: String,
    pub generated: Spectrum<f64>,
    pub truth: Spectrum<f64>,
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub name: String,
    pub class: Option<String>,
    pub metrics: Option<PairMetrics<f64>>,
    pub stats_generated: SpectrumStats<f64>,
    pub stats_truth: SpectrumStats<f64>,
    /// Why `metrics` is missing.
    pub error: Option<String>,
}

/// Mean and population standard deviation over the finite values; infinite
/// values are counted separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub n_infinite: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let mut finite = Vec::new();
        let mut n_infinite = 0;
        for v in values {
            if v.is_finite() {
                finite.push(v);
            } else if v.is_infinite() {
                n_infinite += 1;
            }
        }
        if finite.is_empty() {
            return Stat { n: 0, n_infinite, mean: None, std: None };
        }
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat { n: finite.len(), n_infinite, mean: Some(mean), std: Some(var.sqrt()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub ssim: Stat,
    pub rmse: Stat,
    pub psnr: Stat,
    pub correlation: Stat,
    pub auc_generated: Stat,
    pub auc_truth: Stat,
    pub peak_height_generated: Stat,
    pub peak_height_truth: Stat,
    pub fwhm_generated: Stat,
    pub fwhm_truth: Stat,
    pub snr_generated: Stat,
    pub snr_truth: Stat,
}

impl Aggregates {
    pub fn from_records(records: &[PairRecord]) -> Aggregates {
        let metric = |f: fn(&PairMetrics<f64>) -> f64| Stat::of(records.iter().filter_map(|r| r.metrics.as_ref()).map(f));
        let present = |f: fn(&PairRecord) -> &SpectrumStats<f64>, g: fn(&SpectrumStats<f64>) -> f64| {
            Stat::of(records.iter().map(f).filter(|s| !s.absent).map(g))
        };
        Aggregates {
            ssim: metric(|m| m.ssim),
            rmse: metric(|m| m.rmse),
            psnr: metric(|m| m.psnr),
            correlation: metric(|m| m.correlation),
            auc_generated: metric(|m| m.auc_generated),
            auc_truth: metric(|m| m.auc_truth),
            peak_height_generated: present(|r| &r.stats_generated, |s| s.mean_peak_height),
            peak_height_truth: present(|r| &r.stats_truth, |s| s.mean_peak_height),
            fwhm_generated: present(|r| &r.stats_generated, |s| s.mean_fwhm),
            fwhm_truth: present(|r| &r.stats_truth, |s| s.mean_fwhm),
            snr_generated: Stat::of(records.iter().map(|r| r.stats_generated.snr)),
            snr_truth: Stat::of(records.iter().map(|r| r.stats_truth.snr)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationBlock {
    pub generated: ClassificationResult,
    pub truth: ClassificationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub format: String,
    pub version: u32,
    pub n_pairs: usize,
    pub n_failed: usize,
    pub pairs: Vec<PairRecord>,
    pub aggregates: Aggregates,
    /// JS divergence between the per-spectrum mean peak heights of the
    /// generated and truth sets; `None` when either set has no peaks.
    pub js_height: Option<f64>,
    pub js_fwhm: Option<f64>,
    pub classification: Option<ClassificationBlock>,
}

impl DatasetReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<DatasetReport> {
        let r: DatasetReport = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::Input(format!("not a report document (format {:?})", r.format)));
        }
        Ok(r)
    }
}

pub fn build_dataset_report(pairs: &[EvalPair], cfg: &ReportConfig) -> Result<DatasetReport> {
    if pairs.is_empty() {
        return Err(Error::Input("no pairs to evaluate".into()));
    }
    let records: Vec<PairRecord> = pairs
        .iter()
        .map(|p| {
            let (metrics, error) = match pair_metrics(&p.generated, &p.truth) {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PairRecord {
                name: p.name.clone(),
                class: p.class.clone(),
                metrics,
                stats_generated: measure_stats(&p.generated, &cfg.fit),
                stats_truth: measure_stats(&p.truth, &cfg.fit),
                error,
            }
        })
        .collect();

    let js_of = |g: fn(&SpectrumStats<f64>) -> f64| -> Result<Option<f64>> {
        let a: Vec<f64> = records.iter().filter(|r| !r.stats_generated.absent).map(|r| g(&r.stats_generated)).collect();
        let b: Vec<f64> = records.iter().filter(|r| !r.stats_truth.absent).map(|r| g(&r.stats_truth)).collect();
        if a.is_empty() || b.is_empty() {
            return Ok(None);
        }
        js_divergence(&a, &b, cfg.js_bins).map(Some)
    };
    let js_height = js_of(|s| s.mean_peak_height)?;
    let js_fwhm = js_of(|s| s.mean_fwhm)?;

    let classes: BTreeSet<&str> = pairs.iter().filter_map(|p| p.class.as_deref()).collect();
    let classification = if classes.len() >= 2 && pairs.iter().all(|p| p.class.is_some()) {
        let labelled = |f: fn(&EvalPair) -> &Spectrum<f64>| -> Vec<(Spectrum<f64>, String)> {
            pairs.iter().map(|p| (f(p).clone(), p.class.clone().expect("checked above"))).collect()
        };
        Some(ClassificationBlock {
            generated: classify_information_transfer(&labelled(|p| &p.generated), &cfg.classifier)?,
            truth: classify_information_transfer(&labelled(|p| &p.truth), &cfg.classifier)?,
        })
    } else {
        None
    };

    Ok(DatasetReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        n_pairs: records.len(),
        n_failed: records.iter().filter(|r| r.error.is_some()).count(),
        aggregates: Aggregates::from_records(&records),
        pairs: records,
        js_height,
        js_fwhm,
        classification,
    })
}
