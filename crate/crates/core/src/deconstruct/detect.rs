//! Local-maximum peak detection with topographic prominence.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::spectrum::{noise_sigma, Spectrum};

use super::FitConfig;

/// A detected local maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DetectedPeak<T: Real> {
    pub index: usize,
    pub center: T,
    pub height: T,
    pub prominence: T,
    /// Half-maximum crossing width, axis units.
    pub width_estimate: T,
}

pub const NOISE_PROMINENCE_SIGMAS: f64 = 8.0;

/// Finds local maxima whose prominence is at least
/// `cfg.prominence_threshold × max(intensity)` and at least
/// [`NOISE_PROMINENCE_SIGMAS`] times the estimated noise level. At most `cfg.max_peaks` are
/// kept (largest prominence first); the result is sorted by center.
pub fn detect_peaks<T: Real>(s: &Spectrum<T>, cfg: &FitConfig<T>) -> Vec<DetectedPeak<T>> {
    let y = s.intensity();
    let x = s.axis();
    let top = s.max_intensity();
    if !(top > T::zero()) {
        return Vec::new();
    }
    let noise_floor = T::lit(NOISE_PROMINENCE_SIGMAS) * noise_sigma(y);
    let threshold = (cfg.prominence_threshold * top).max(noise_floor);
    let mut peaks: Vec<DetectedPeak<T>> = local_maxima(y)
        .into_iter()
        .filter_map(|i| {
            let prominence = prominence(y, i);
            (prominence >= threshold).then(|| DetectedPeak {
                index: i,
                center: x[i],
                height: y[i],
                prominence,
                width_estimate: half_max_width(x, y, i),
            })
        })
        .collect();
    peaks.sort_by(|a, b| {
        b.prominence
            .partial_cmp(&a.prominence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index.cmp(&b.index))
    });
    peaks.truncate(cfg.max_peaks);
    peaks.sort_by_key(|p| p.index);
    peaks
}

/// Interior local maxima; a flat top reports its middle sample.
fn local_maxima<T: Real>(y: &[T]) -> Vec<usize> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence<T: Real>(y: &[T], i: usize) -> T {
    let h = y[i];
    let mut left_min = h;
    for j in (0..i).rev() {
        if y[j] > h {
            break;
        }
        left_min = left_min.min(y[j]);
    }
    let mut right_min = h;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Full width at half of `y[i]`, with linear interpolation of the crossings.
///
/// A side that reaches a valley or the edge before crossing borrows the
/// other side's half width.
pub fn half_max_width<T: Real>(x: &[T], y: &[T], i: usize) -> T {
    let level = y[i] * T::lit(0.5);
    let n = y.len();

    let mut left = None;
    let mut left_stop = x[0];
    let mut j = i;
    while j > 0 {
        if y[j - 1] <= level {
            let t = (y[j] - level) / (y[j] - y[j - 1]);
            left = Some(x[i] - (x[j] - t * (x[j] - x[j - 1])));
            break;
        }
        if y[j - 1] > y[j] {
            left_stop = x[j];
            break;
        }
        j -= 1;
    }

    let mut right = None;
    let mut right_stop = x[n - 1];
    let mut j = i;
    while j + 1 < n {
        if y[j + 1] <= level {
            let t = (y[j] - level) / (y[j] - y[j + 1]);
            right = Some((x[j] + t * (x[j + 1] - x[j])) - x[i]);
            break;
        }
        if y[j + 1] > y[j] {
            right_stop = x[j];
            break;
        }
        j += 1;
    }

    match (left, right) {
        (Some(l), Some(r)) => l + r,
        (Some(l), None) => l + l,
        (None, Some(r)) => r + r,
        (None, None) => right_stop - left_stop,
    }
}
