//! Evaluation: paired-spectrum metrics, peak statistics, distribution
//! divergence, classification harness and dataset reports.

pub mod classify;
pub mod js;
pub mod metrics;
pub mod report;
pub mod stats;

pub use classify::{classify_information_transfer, ClassificationResult, ClassifierConfig, RoundResult};
pub use js::js_divergence;
pub use metrics::{pair_metrics, pearson, psnr_from_rmse, rmse, ssim_1d, trapezoid, PairMetrics};
pub use report::{build_dataset_report, DatasetReport, EvalPair, PairRecord, ReportConfig, Stat};
pub use stats::{measure_stats, SpectrumStats};
