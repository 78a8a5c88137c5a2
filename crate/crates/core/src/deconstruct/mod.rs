//! Decomposition of a spectrum into prior line shapes plus a residual.

mod detect;
pub mod lm;

pub use detect::{detect_peaks, half_max_width, DetectedPeak};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineshape::{eval_lineshape, lineshape_gradient, sum_on_axis, PeakKind, PeakModel};
use crate::scalar::Real;
use crate::spectrum::Spectrum;
use lm::{levenberg_marquardt, LeastSquaresProblem, LmSettings};

/// Peak detection and fitting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct FitConfig<T: Real> {
    pub max_peaks: usize,
    /// Minimum prominence as a fraction of the maximum intensity.
    pub prominence_threshold: T,
    pub max_iterations: usize,
    pub lm_lambda0: T,
    pub convergence_tol: T,
    /// `[min, max]` width bounds in axis units. When absent they are derived
    /// from the grid: half a sample step up to half the axis span.
    pub width_bounds: Option<[T; 2]>,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        FitConfig {
            max_peaks: 32,
            prominence_threshold: T::lit(0.02),
            max_iterations: 200,
            lm_lambda0: T::lit(1e-3),
            convergence_tol: T::lit(1e-8),
            width_bounds: None,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_peaks == 0 || self.max_iterations == 0 {
            return Err(Error::Config("max_peaks and max_iterations must be positive".into()));
        }
        if !(self.prominence_threshold > T::zero() && self.prominence_threshold < T::one()) {
            return Err(Error::Config("prominence_threshold must lie in (0, 1)".into()));
        }
        if !(self.lm_lambda0 > T::zero() && self.convergence_tol > T::zero()) {
            return Err(Error::Config("lm_lambda0 and convergence_tol must be positive".into()));
        }
        if let Some([lo, hi]) = self.width_bounds {
            if !(lo > T::zero() && hi > lo) {
                return Err(Error::Config("width bounds must satisfy 0 < min < max".into()));
            }
        }
        Ok(())
    }

    fn resolved_width_bounds(&self, s: &Spectrum<T>) -> [T; 2] {
        self.width_bounds.unwrap_or_else(|| {
            let step = s.span() / T::from_usize_lossy(s.len() - 1);
            [step * T::lit(0.5), s.span() * T::lit(0.5)]
        })
    }
}

/// Fitted peaks, residual and diagnostics for one spectrum under one prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Deconstruction<T: Real> {
    pub prior_kind: PeakKind,
    /// Sorted by center.
    pub peaks: Vec<PeakModel<T>>,
    /// Input minus the fitted model, on the input axis.
    pub residual: Spectrum<T>,
    pub rmse_fit: T,
    pub n_iterations: usize,
    pub converged: bool,
    /// Cost `½‖r‖²` after each accepted step of the final refinement.
    #[serde(skip)]
    pub cost_history: Vec<T>,
}

impl<T: Real> Deconstruction<T> {
    /// `sum_model(peaks)` on the residual's axis.
    pub fn model(&self) -> Vec<T> {
        sum_on_axis(&self.peaks, self.residual.axis())
    }

    /// Model plus residual, i.e. the original input intensities.
    pub fn reconstruct(&self) -> Vec<T> {
        self.model()
            .into_iter()
            .zip(self.residual.intensity())
            .map(|(m, &r)| m + r)
            .collect()
    }
}

struct Bounds<T> {
    center: [T; 2],
    width: [T; 2],
    min_amplitude: T,
}

struct PeakFitProblem<'a, T: Real> {
    axis: &'a [T],
    target: &'a [T],
    kind: PeakKind,
    bounds: Bounds<T>,
}

fn pack<T: Real>(peaks: &[PeakModel<T>], kind: PeakKind) -> Vec<T> {
    let mut out = Vec::with_capacity(peaks.len() * kind.n_params());
    for p in peaks {
        out.push(p.center);
        out.push(p.amplitude);
        if kind.uses_sigma() {
            out.push(p.sigma);
        }
        if kind.uses_gamma() {
            out.push(p.gamma);
        }
    }
    out
}

fn unpack<T: Real>(params: &[T], kind: PeakKind) -> Vec<PeakModel<T>> {
    params
        .chunks_exact(kind.n_params())
        .map(|c| match kind {
            PeakKind::Gaussian => PeakModel::gaussian(c[0], c[1], c[2]),
            PeakKind::Lorentzian => PeakModel::lorentzian(c[0], c[1], c[2]),
            PeakKind::Voigt => PeakModel::voigt(c[0], c[1], c[2], c[3]),
        })
        .collect()
}

impl<T: Real> LeastSquaresProblem<T> for PeakFitProblem<'_, T> {
    fn n_residuals(&self) -> usize {
        self.axis.len()
    }

    fn residuals(&self, params: &[T], out: &mut [T]) {
        let peaks = unpack(params, self.kind);
        for ((o, &x), &y) in out.iter_mut().zip(self.axis).zip(self.target) {
            *o = peaks.iter().fold(T::zero(), |acc, p| acc + eval_lineshape(p, x)) - y;
        }
    }

    fn jacobian(&self, params: &[T], jac: &mut [T]) {
        let k = self.kind.n_params();
        let n = params.len();
        let peaks = unpack(params, self.kind);
        for (row, &x) in jac.chunks_exact_mut(n).zip(self.axis) {
            for (slot, p) in row.chunks_exact_mut(k).zip(&peaks) {
                let g = lineshape_gradient(p, x);
                slot[0] = g.center;
                slot[1] = g.amplitude;
                match self.kind {
                    PeakKind::Gaussian => slot[2] = g.sigma,
                    PeakKind::Lorentzian => slot[2] = g.gamma,
                    PeakKind::Voigt => {
                        slot[2] = g.sigma;
                        slot[3] = g.gamma;
                    }
                }
            }
        }
    }

    fn project(&self, params: &mut [T]) {
        let b = &self.bounds;
        for c in params.chunks_exact_mut(self.kind.n_params()) {
            c[0] = c[0].max(b.center[0]).min(b.center[1]);
            c[1] = c[1].max(b.min_amplitude);
            for w in &mut c[2..] {
                *w = w.max(b.width[0]).min(b.width[1]);
            }
        }
    }
}

/// Keeps the higher-amplitude peak of every pair whose centers lie within
/// `tol` of each other. Returns true when something was removed.
fn merge_close_peaks<T: Real>(peaks: &mut Vec<PeakModel<T>>, tol: T) -> bool {
    sort_by_center(peaks);
    let mut merged = false;
    let mut i = 0;
    while i + 1 < peaks.len() {
        if (peaks[i + 1].center - peaks[i].center).abs() <= tol {
            let drop = if peaks[i].amplitude >= peaks[i + 1].amplitude { i + 1 } else { i };
            peaks.remove(drop);
            merged = true;
        } else {
            i += 1;
        }
    }
    merged
}

fn sort_by_center<T: Real>(peaks: &mut [PeakModel<T>]) {
    peaks.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap_or(std::cmp::Ordering::Equal));
}

const MAX_MERGE_ROUNDS: usize = 8;

/// Fits `s` as a sum of `prior` line shapes.
///
/// Peaks from [`detect_peaks`] seed a joint Levenberg-Marquardt refinement of
/// all parameters with box constraints applied by projection. Peaks that
/// collapse onto a neighbour (centers within one grid step) are merged and
/// the refinement restarted.
pub fn fit_deconstruction<T: Real>(
    s: &Spectrum<T>,
    prior: PeakKind,
    cfg: &FitConfig<T>,
) -> Result<Deconstruction<T>> {
    cfg.validate()?;
    let axis = s.axis();
    let n = s.len();
    let step = s.span() / T::from_usize_lossy(n - 1);
    let width = cfg.resolved_width_bounds(s);
    let bounds = Bounds {
        center: [axis[0], axis[n - 1]],
        width,
        min_amplitude: T::lit(1e-9),
    };
    let problem = PeakFitProblem { axis, target: s.intensity(), kind: prior, bounds };

    let mut peaks: Vec<PeakModel<T>> = detect_peaks(s, cfg)
        .into_iter()
        .map(|d| {
            let fwhm = d.width_estimate.max(step);
            PeakModel::with_fwhm(prior, d.center, d.height.max(T::lit(1e-6)), fwhm)
        })
        .collect();

    let settings = LmSettings {
        max_iterations: cfg.max_iterations,
        lambda0: cfg.lm_lambda0,
        tolerance: cfg.convergence_tol,
    };
    let mut iterations = 0;
    let mut converged = true;
    let mut history = Vec::new();

    for _ in 0..MAX_MERGE_ROUNDS {
        if peaks.is_empty() {
            break;
        }
        let start = pack(&peaks, prior);
        let outcome = levenberg_marquardt(&problem, &start, &settings);
        iterations += outcome.iterations;
        converged = outcome.converged;
        history = outcome.cost_history;
        peaks = unpack(&outcome.params, prior);
        if !merge_close_peaks(&mut peaks, step) {
            break;
        }
    }

    // components driven to the amplitude floor carry no signal
    peaks.retain(|p| p.amplitude > T::lit(1e-6));
    sort_by_center(&mut peaks);

    let model = sum_on_axis(&peaks, axis);
    let residual: Vec<T> = s.intensity().iter().zip(&model).map(|(&y, &m)| y - m).collect();
    let rmse_fit = (residual.iter().map(|&r| r * r).sum::<T>() / T::from_usize_lossy(n)).sqrt();
    Ok(Deconstruction {
        prior_kind: prior,
        peaks,
        residual: s.with_intensity(residual)?,
        rmse_fit,
        n_iterations: iterations,
        converged,
        cost_history: history,
    })
}

/// Fixed-length conditioning vector of length `4·k_max + 1`.
///
/// For the `k_max` strongest peaks by amplitude: center mapped onto `[0, 1]`
/// over the axis, amplitude, σ / span, γ / span. Zero padded, then `rmse_fit`.
pub fn deconstruction_features<T: Real>(d: &Deconstruction<T>, k_max: usize) -> Vec<T> {
    let axis = d.residual.axis();
    let origin = axis[0];
    let span = d.residual.span();
    let mut ranked: Vec<&PeakModel<T>> = d.peaks.iter().collect();
    ranked.sort_by(|a, b| {
        b.amplitude
            .partial_cmp(&a.amplitude)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.center.partial_cmp(&b.center).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.sigma.partial_cmp(&b.sigma).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.gamma.partial_cmp(&b.gamma).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut out = vec![T::zero(); 4 * k_max + 1];
    for (slot, p) in out.chunks_exact_mut(4).zip(ranked) {
        slot[0] = (p.center - origin) / span;
        slot[1] = p.amplitude;
        slot[2] = p.sigma / span;
        slot[3] = p.gamma / span;
    }
    out[4 * k_max] = d.rmse_fit;
    out
}
