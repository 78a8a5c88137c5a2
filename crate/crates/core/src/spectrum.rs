//! Sampled 1-D spectra, canonical grids and preprocessing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spectroscopic modality of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ir,
    Raman,
    Xrd,
    Other,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Ir, Modality::Raman, Modality::Xrd, Modality::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ir => "ir",
            Modality::Raman => "raman",
            Modality::Xrd => "xrd",
            Modality::Other => "other",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ir" | "infrared" => Ok(Modality::Ir),
            "raman" => Ok(Modality::Raman),
            "xrd" => Ok(Modality::Xrd),
            "other" => Ok(Modality::Other),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

/// Uniform sampling grid used as fixed-length model input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridSpec<T: Real> {
    pub start: T,
    pub end: T,
    pub n_points: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(start: T, end: T, n_points: usize) -> Result<Self> {
        let g = GridSpec { start, end, n_points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if self.end <= self.start {
            return Err(Error::Config(format!(
                "grid end ({}) must exceed start ({})",
                self.end, self.start
            )));
        }
        if self.n_points < 2 {
            return Err(Error::Config("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn span(&self) -> T {
        self.end - self.start
    }

    pub fn step(&self) -> T {
        self.span() / T::from_usize_lossy(self.n_points - 1)
    }

    /// The `i`-th grid coordinate. The last point is exactly `end`.
    pub fn coord(&self, i: usize) -> T {
        if i + 1 == self.n_points {
            self.end
        } else {
            self.start + self.step() * T::from_usize_lossy(i)
        }
    }

    pub fn axis(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.coord(i)).collect()
    }

    /// True when `axis` is exactly this grid.
    pub fn matches(&self, axis: &[T]) -> bool {
        axis.len() == self.n_points && axis.iter().enumerate().all(|(i, &x)| x == self.coord(i))
    }
}

/// A sampled spectrum with a strictly increasing axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Spectrum<T: Real> {
    axis: Vec<T>,
    intensity: Vec<T>,
    pub modality: Modality,
    pub label: Option<String>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(axis: Vec<T>, intensity: Vec<T>, modality: Modality) -> Result<Self> {
        if axis.len() != intensity.len() {
            return Err(Error::Input(format!(
                "axis has {} points but intensity has {}",
                axis.len(),
                intensity.len()
            )));
        }
        if axis.len() < 2 {
            return Err(Error::Input("spectrum needs at least 2 points".into()));
        }
        if axis.iter().chain(intensity.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("spectrum contains non-finite values".into()));
        }
        if axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("axis must be strictly increasing".into()));
        }
        Ok(Spectrum {
            axis,
            intensity,
            modality,
            label: None,
        })
    }

    pub fn on_grid(grid: &GridSpec<T>, intensity: Vec<T>, modality: Modality) -> Result<Self> {
        grid.validate()?;
        Spectrum::new(grid.axis(), intensity, modality)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn axis(&self) -> &[T] {
        &self.axis
    }

    pub fn intensity(&self) -> &[T] {
        &self.intensity
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn span(&self) -> T {
        self.axis[self.axis.len() - 1] - self.axis[0]
    }

    pub fn max_intensity(&self) -> T {
        self.intensity.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min_intensity(&self) -> T {
        self.intensity.iter().copied().fold(T::infinity(), T::min)
    }

    /// Same axis and metadata, new intensities.
    pub fn with_intensity(&self, intensity: Vec<T>) -> Result<Self> {
        let mut s = Spectrum::new(self.axis.clone(), intensity, self.modality)?;
        s.label = self.label.clone();
        Ok(s)
    }

    /// Linear interpolation at `x`; zero outside the sampled range.
    pub fn interpolate(&self, x: T) -> T {
        let n = self.axis.len();
        if x < self.axis[0] || x > self.axis[n - 1] {
            return T::zero();
        }
        // first index with axis[idx] >= x
        let idx = self.axis.partition_point(|&a| a < x);
        if self.axis[idx] == x {
            return self.intensity[idx];
        }
        let (x0, x1) = (self.axis[idx - 1], self.axis[idx]);
        let (y0, y1) = (self.intensity[idx - 1], self.intensity[idx]);
        let t = (x - x0) / (x1 - x0);
        y0 + (y1 - y0) * t
    }
}

/// Resamples `s` onto the uniform grid `g` by linear interpolation.
pub fn resample<T: Real>(s: &Spectrum<T>, g: &GridSpec<T>) -> Result<Spectrum<T>> {
    g.validate()?;
    let axis = g.axis();
    let intensity = axis.iter().map(|&x| s.interpolate(x)).collect();
    let mut out = Spectrum::new(axis, intensity, s.modality)?;
    out.label = s.label.clone();
    Ok(out)
}

/// Affinely maps intensities onto `[0, 1]`.
pub fn normalize_minmax<T: Real>(s: &Spectrum<T>) -> Result<Spectrum<T>> {
    let lo = s.min_intensity();
    let hi = s.max_intensity();
    if hi <= lo {
        return Err(Error::Degenerate(
            "constant intensity cannot be min-max normalized".into(),
        ));
    }
    let range = hi - lo;
    let intensity = s
        .intensity
        .iter()
        .map(|&v| if v == hi { T::one() } else { (v - lo) / range })
        .collect();
    s.with_intensity(intensity)
}

const NOISE_SMOOTHING_WINDOW: usize = 9;

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average<T: Real>(y: &[T], window: usize) -> Vec<T> {
    let half = window / 2;
    let n = y.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            y[lo..hi].iter().copied().sum::<T>() / T::from_usize_lossy(hi - lo)
        })
        .collect()
}

/// Noise standard deviation from the high-pass residual `y − MA₉(y)`.
///
/// The residual is cut into four blocks (at least 16 samples each); the
/// variance is averaged over the quietest quarter of blocks and rescaled by
/// 9/8, the residual-to-noise variance ratio of white noise under a 9-point
/// moving average.
pub fn noise_sigma<T: Real>(y: &[T]) -> T {
    let smooth = moving_average(y, NOISE_SMOOTHING_WINDOW);
    let resid: Vec<T> = y.iter().zip(&smooth).map(|(&a, &b)| a - b).collect();
    let block = (resid.len() / 4).max(16).min(resid.len());
    let mut variances: Vec<T> = resid
        .chunks_exact(block)
        .map(|c| {
            let n = T::from_usize_lossy(c.len());
            let m = c.iter().copied().sum::<T>() / n;
            c.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n
        })
        .collect();
    variances.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let keep = variances.len().div_ceil(4).max(1);
    let var = variances[..keep].iter().copied().sum::<T>() / T::from_usize_lossy(keep);
    let n = T::from_usize_lossy(NOISE_SMOOTHING_WINDOW);
    (var * n / (n - T::one())).sqrt()
}
