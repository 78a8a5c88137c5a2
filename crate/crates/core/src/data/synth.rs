//! Seeded synthetic paired spectra with a known modality mapping.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineshape::{sum_on_axis, PeakKind, PeakModel};
use crate::seeds::stream_rng;
use crate::spectrum::{GridSpec, Modality, Spectrum};

/// Shift/scale mapping from modality-A peaks to modality-B peaks, in
/// span-relative coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    /// Center shift as a fraction of the axis span.
    pub shift: f64,
    pub amplitude_scale: f64,
    pub width_scale: f64,
}

impl MappingRule {
    pub const IDENTITY: MappingRule = MappingRule { shift: 0.0, amplitude_scale: 1.0, width_scale: 1.0 };

    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(MappingRule { shift: 0.1, amplitude_scale: 0.8, width_scale: 1.2 }),
            other => Err(Error::Config(format!("unknown mapping rule id {other}"))),
        }
    }
}

/// A peak placed in span-relative coordinates: center and FWHM as fractions
/// of the axis span.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RelativePeak {
    center: f64,
    amplitude: f64,
    fwhm: f64,
}

impl RelativePeak {
    fn mapped(&self, rule: &MappingRule) -> Self {
        RelativePeak {
            center: self.center + rule.shift,
            amplitude: self.amplitude * rule.amplitude_scale,
            fwhm: self.fwhm * rule.width_scale,
        }
    }

    fn on_grid(&self, kind: PeakKind, grid: &GridSpec<f64>) -> PeakModel<f64> {
        let span = grid.span();
        PeakModel::with_fwhm(kind, grid.start + self.center * span, self.amplitude, self.fwhm * span)
    }
}

/// Parameters of a synthetic paired dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_pairs: usize,
    pub prior_kind: PeakKind,
    /// Inclusive `[min, max]` number of peaks per spectrum.
    pub peak_count: [usize; 2],
    /// FWHM range as a fraction of the axis span.
    pub width_range: [f64; 2],
    pub amplitude_range: [f64; 2],
    pub noise_std: f64,
    pub mapping_rule: u32,
    pub seed: u64,
    pub modality_a: Modality,
    pub modality_b: Modality,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_pairs: 200,
            prior_kind: PeakKind::Gaussian,
            peak_count: [1, 1],
            width_range: [0.08, 0.16],
            amplitude_range: [0.3, 1.0],
            noise_std: 0.005,
            mapping_rule: 1,
            seed: 0,
            modality_a: Modality::Ir,
            modality_b: Modality::Raman,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let [cmin, cmax] = self.peak_count;
        let [wmin, wmax] = self.width_range;
        let [amin, amax] = self.amplitude_range;
        if self.n_pairs == 0 || cmin == 0 || cmax < cmin {
            return Err(Error::Config("n_pairs and peak_count must be positive, min ≤ max".into()));
        }
        if !(wmin > 0.0 && wmax >= wmin && wmax < 0.5) {
            return Err(Error::Config("width_range must satisfy 0 < min ≤ max < 0.5".into()));
        }
        if !(amin > 0.0 && amax >= amin) {
            return Err(Error::Config("amplitude_range must satisfy 0 < min ≤ max".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be ≥ 0".into()));
        }
        MappingRule::from_id(self.mapping_rule)?;
        Ok(())
    }
}

/// One synthetic pair with the peaks used to render it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub name: String,
    pub a: Spectrum<f64>,
    pub b: Spectrum<f64>,
    pub peaks_a: Vec<PeakModel<f64>>,
    pub peaks_b: Vec<PeakModel<f64>>,
}

const EDGE_MARGIN: f64 = 0.05;
const MIN_SEPARATION_FWHM: f64 = 3.0;
const PLACEMENT_ATTEMPTS: usize = 1000;

fn draw_peaks<R: Rng>(spec: &SynthSpec, rule: &MappingRule, rng: &mut R) -> Vec<RelativePeak> {
    let count = rng.random_range(spec.peak_count[0]..=spec.peak_count[1]);
    let lo = EDGE_MARGIN + (-rule.shift).max(0.0);
    let hi = 1.0 - EDGE_MARGIN - rule.shift.max(0.0);
    let mut peaks: Vec<RelativePeak> = Vec::with_capacity(count);
    // a peak that cannot be placed after PLACEMENT_ATTEMPTS draws is skipped
    for _ in 0..count {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let fwhm = rng.random_range(spec.width_range[0]..=spec.width_range[1]);
            let center = rng.random_range(lo..hi);
            let amplitude = rng.random_range(spec.amplitude_range[0]..=spec.amplitude_range[1]);
            let clear = peaks
                .iter()
                .all(|p| (p.center - center).abs() >= MIN_SEPARATION_FWHM * p.fwhm.max(fwhm));
            if clear {
                peaks.push(RelativePeak { center, amplitude, fwhm });
                break;
            }
        }
    }
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    peaks
}

fn render<R: Rng>(
    peaks: &[PeakModel<f64>],
    grid: &GridSpec<f64>,
    modality: Modality,
    noise: Option<&Normal<f64>>,
    rng: &mut R,
) -> Result<Spectrum<f64>> {
    let mut y = sum_on_axis(peaks, &grid.axis());
    if let Some(n) = noise {
        y.iter_mut().for_each(|v| *v += n.sample(rng));
    }
    Spectrum::on_grid(grid, y, modality)
}

/// Renders `spec.n_pairs` pairs; B's peaks follow A's under the mapping rule.
pub fn generate_synthetic_pairs(
    spec: &SynthSpec,
    grid_a: &GridSpec<f64>,
    grid_b: &GridSpec<f64>,
) -> Result<Vec<SyntheticPair>> {
    spec.validate()?;
    generate_with_rule(spec, &MappingRule::from_id(spec.mapping_rule)?, grid_a, grid_b)
}

/// [`generate_synthetic_pairs`] with an explicit mapping rule.
pub fn generate_with_rule(
    spec: &SynthSpec,
    rule: &MappingRule,
    grid_a: &GridSpec<f64>,
    grid_b: &GridSpec<f64>,
) -> Result<Vec<SyntheticPair>> {
    grid_a.validate()?;
    grid_b.validate()?;
    let mut peak_rng = stream_rng(spec.seed, "synth-peaks");
    let mut noise_rng = stream_rng(spec.seed, "synth-noise");
    let noise = (spec.noise_std > 0.0)
        .then(|| Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string())))
        .transpose()?;
    let width = (spec.n_pairs.max(1) as f64).log10().floor() as usize + 1;
    (0..spec.n_pairs)
        .map(|i| {
            let rel = draw_peaks(spec, rule, &mut peak_rng);
            let peaks_a: Vec<_> = rel.iter().map(|p| p.on_grid(spec.prior_kind, grid_a)).collect();
            let peaks_b: Vec<_> = rel.iter().map(|p| p.mapped(rule).on_grid(spec.prior_kind, grid_b)).collect();
            let name = format!("synth_{i:0width$}");
            let a = render(&peaks_a, grid_a, spec.modality_a, noise.as_ref(), &mut noise_rng)?.with_label(&name);
            let b = render(&peaks_b, grid_b, spec.modality_b, noise.as_ref(), &mut noise_rng)?.with_label(&name);
            Ok(SyntheticPair { name, a, b, peaks_a, peaks_b })
        })
        .collect()
}
