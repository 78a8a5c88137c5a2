//! Latent-space inspection: posterior-mean traces, PCA and run comparisons.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::GenerativeModel;
use crate::lineshape::PeakKind;
use crate::linalg::symmetric_eigen;
use crate::scalar::Real;
use crate::seeds::stream_rng;

/// Posterior means of a fixed input set at one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTrace {
    pub run_id: String,
    pub prior_kind: PeakKind,
    pub epoch: usize,
    pub sample_names: Vec<String>,
    /// One row of length `latent_dim` per input.
    pub mu_vectors: Vec<Vec<f64>>,
}

impl LatentTrace {
    pub fn n_samples(&self) -> usize {
        self.mu_vectors.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_vectors.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.latent_dim();
        if self.mu_vectors.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Input(format!("trace {}: ragged or non-finite latent rows", self.run_id)));
        }
        if self.sample_names.len() != self.mu_vectors.len() {
            return Err(Error::Input(format!("trace {}: {} names for {} rows", self.run_id, self.sample_names.len(), self.mu_vectors.len())));
        }
        Ok(())
    }
}

/// Records `μ` (no sampling noise) for every encoder input.
pub fn capture_latents<T: Real>(
    model: &GenerativeModel<T>,
    inputs: &[Vec<T>],
    sample_names: &[String],
    run_id: &str,
    epoch: usize,
) -> Result<LatentTrace> {
    if sample_names.len() != inputs.len() {
        return Err(Error::Input(format!("{} names for {} inputs", sample_names.len(), inputs.len())));
    }
    let n_in = model.config.encoder_input_len();
    if let Some(bad) = inputs.iter().position(|x| x.len() != n_in) {
        return Err(Error::Input(format!("input {bad} has length {}, expected {n_in}", inputs[bad].len())));
    }
    let x = Array2::from_shape_fn((inputs.len(), n_in), |(r, c)| inputs[r][c]);
    let mu = model.posterior_means(x.view());
    Ok(LatentTrace {
        run_id: run_id.to_string(),
        prior_kind: model.conditioning.prior,
        epoch,
        sample_names: sample_names.to_vec(),
        mu_vectors: mu.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal axes, one per component.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Centered data projected onto the components (`n × n_components`).
    pub projections: Vec<Vec<f64>>,
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Input("rows have different lengths".into()));
    }
    Ok(Array2::from_shape_fn((rows.len(), cols), |(r, c)| rows[r][c]))
}

/// Principal components from the eigen-decomposition of the sample
/// covariance. Each axis is oriented so its largest-magnitude loading is
/// positive; variance ratios are relative to the total variance.
pub fn pca_project(rows: &[Vec<f64>], n_components: usize) -> Result<Pca> {
    let x = to_matrix(rows)?;
    pca_matrix(x.view(), n_components)
}

fn pca_matrix(x: ArrayView2<f64>, n_components: usize) -> Result<Pca> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::Input("PCA needs at least two rows".into()));
    }
    if n_components == 0 || n_components > (n - 1).min(d) {
        return Err(Error::Config(format!(
            "n_components must be in 1..={} for {n} rows of dimension {d}",
            (n - 1).min(d)
        )));
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n ≥ 2");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let (values, vectors) = symmetric_eigen(cov.as_slice().expect("standard layout"), d);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let mut components = Vec::with_capacity(n_components);
    let mut ratios = Vec::with_capacity(n_components);
    for k in 0..n_components {
        let mut axis: Vec<f64> = (0..d).map(|i| vectors[i * d + k]).collect();
        let lead = axis.iter().copied().fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
        ratios.push(if total > 0.0 { values[k].max(0.0) / total } else { 0.0 });
    }
    let projections = centered
        .rows()
        .into_iter()
        .map(|r| components.iter().map(|c| r.iter().zip(c).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Ok(Pca { mean: mean.to_vec(), components, explained_variance_ratio: ratios, projections })
}

/// Cosine similarity of corresponding rows; `None` where either row is zero.
pub fn cosine_similarity_profile(a: &LatentTrace, b: &LatentTrace) -> Result<Vec<Option<f64>>> {
    if a.n_samples() != b.n_samples() || a.latent_dim() != b.latent_dim() {
        return Err(Error::Input(format!(
            "trace shapes differ: {}×{} vs {}×{}",
            a.n_samples(),
            a.latent_dim(),
            b.n_samples(),
            b.latent_dim()
        )));
    }
    Ok(a.mu_vectors.iter().zip(&b.mu_vectors).map(|(u, v)| cosine(u, v)).collect())
}

pub fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Some((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn centroid(points: &[&Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let mut c = vec![0.0; d];
    for p in points {
        c.iter_mut().zip(p.iter()).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().for_each(|v| *v /= points.len() as f64);
    c
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_shuffles: usize,
}

/// Two-sample permutation test on the distance between group centroids.
/// `p = (1 + #{shuffled ≥ observed}) / (1 + n_shuffles)`.
pub fn centroid_permutation_test(
    group_a: &[Vec<f64>],
    group_b: &[Vec<f64>],
    n_shuffles: usize,
    seed: u64,
) -> Result<PermutationTest> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::Input("permutation test needs two non-empty groups".into()));
    }
    let pooled: Vec<&Vec<f64>> = group_a.iter().chain(group_b).collect();
    let split = group_a.len();
    let stat = |order: &[usize]| {
        let a: Vec<&Vec<f64>> = order[..split].iter().map(|&i| pooled[i]).collect();
        let b: Vec<&Vec<f64>> = order[split..].iter().map(|&i| pooled[i]).collect();
        distance(&centroid(&a), &centroid(&b))
    };
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    let observed = stat(&order);
    let mut rng = stream_rng(seed, "permutation-test");
    let mut at_least = 0;
    for _ in 0..n_shuffles {
        order.shuffle(&mut rng);
        if stat(&order) >= observed {
            at_least += 1;
        }
    }
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (1 + n_shuffles) as f64,
        n_shuffles,
    })
}

/// Paired sign-flip permutation test for rows `a[i]`, `b[i]` that describe
/// the same input. The statistic is the norm of the mean difference; under
/// the null each difference is equally likely to have either sign.
pub fn paired_permutation_test(a: &[Vec<f64>], b: &[Vec<f64>], n_shuffles: usize, seed: u64) -> Result<PermutationTest> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Input(format!("paired test needs equal non-empty groups, got {} and {}", a.len(), b.len())));
    }
    let diffs: Vec<Vec<f64>> = a.iter().zip(b).map(|(u, v)| u.iter().zip(v).map(|(x, y)| x - y).collect()).collect();
    let n = diffs.len() as f64;
    let stat = |signs: &[bool]| {
        let mut m = vec![0.0; diffs[0].len()];
        for (d, &flip) in diffs.iter().zip(signs) {
            let s = if flip { -1.0 } else { 1.0 };
            m.iter_mut().zip(d).for_each(|(acc, v)| *acc += s * v);
        }
        m.iter().map(|v| (v / n) * (v / n)).sum::<f64>().sqrt()
    };
    let observed = stat(&vec![false; diffs.len()]);
    let mut rng = stream_rng(seed, "paired-permutation-test");
    let mut signs = vec![false; diffs.len()];
    let mut at_least = 0;
    for _ in 0..n_shuffles {
        signs.iter_mut().for_each(|s| *s = rng.random_bool(0.5));
        if stat(&signs) >= observed {
            at_least += 1;
        }
    }
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (1 + n_shuffles) as f64,
        n_shuffles,
    })
}

/// Comparison of two runs on the same inputs that differ in their prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSwapAnalysis {
    pub run_a: String,
    pub run_b: String,
    pub pca: Pca,
    /// Rows of `pca.projections` belonging to run A come first.
    pub n_a: usize,
    pub centroid_separation: f64,
    /// Paired sign-flip test over samples; the runs share their inputs.
    pub permutation: PermutationTest,
    /// Unpaired centroid test that ignores the pairing, for reference.
    pub unpaired_permutation: PermutationTest,
    pub cosine_profile: Vec<Option<f64>>,
}

pub fn compare_runs(a: &LatentTrace, b: &LatentTrace, n_shuffles: usize, seed: u64) -> Result<PriorSwapAnalysis> {
    a.validate()?;
    b.validate()?;
    let cosine_profile = cosine_similarity_profile(a, b)?;
    let pooled: Vec<Vec<f64>> = a.mu_vectors.iter().chain(&b.mu_vectors).cloned().collect();
    let pca = pca_project(&pooled, 2)?;
    let (pa, pb) = pca.projections.split_at(a.n_samples());
    if a.sample_names != b.sample_names {
        return Err(Error::Input("runs must be traced on the same samples in the same order".into()));
    }
    let permutation = paired_permutation_test(pa, pb, n_shuffles, seed)?;
    let unpaired_permutation = centroid_permutation_test(pa, pb, n_shuffles, seed)?;
    Ok(PriorSwapAnalysis {
        run_a: a.run_id.clone(),
        run_b: b.run_id.clone(),
        n_a: a.n_samples(),
        centroid_separation: unpaired_permutation.statistic,
        permutation,
        unpaired_permutation,
        pca,
        cosine_profile,
    })
}
