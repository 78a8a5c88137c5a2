//! Per-spectrum peak statistics: mean height, mean FWHM and SNR.

use serde::{Deserialize, Serialize};

use crate::deconstruct::{detect_peaks, half_max_width, FitConfig};
use crate::scalar::Real;
use crate::spectrum::{noise_sigma, Spectrum};

/// Peak statistics of one spectrum. When no peak is detected `absent` is set
/// and the peak fields are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumStats<T: Real> {
    pub n_peaks: usize,
    pub mean_peak_height: T,
    pub mean_fwhm: T,
    #[serde(with = "crate::serde_special")]
    pub snr: T,
    pub absent: bool,
}

pub fn measure_stats<T: Real>(s: &Spectrum<T>, cfg: &FitConfig<T>) -> SpectrumStats<T> {
    let peaks = detect_peaks(s, cfg);
    let sigma = noise_sigma(s.intensity());
    let top = s.max_intensity();
    let snr = if top <= T::zero() {
        T::zero()
    } else if sigma <= T::epsilon() * top {
        T::infinity()
    } else {
        top / sigma
    };
    if peaks.is_empty() {
        return SpectrumStats { n_peaks: 0, mean_peak_height: T::zero(), mean_fwhm: T::zero(), snr, absent: true };
    }
    let n = T::from_usize_lossy(peaks.len());
    let height = peaks.iter().map(|p| p.height).sum::<T>() / n;
    let fwhm = peaks
        .iter()
        .map(|p| half_max_width(s.axis(), s.intensity(), p.index))
        .sum::<T>()
        / n;
    SpectrumStats { n_peaks: peaks.len(), mean_peak_height: height, mean_fwhm: fwhm, snr, absent: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::{sum_model, PeakModel};
    use crate::spectrum::{GridSpec, Modality};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> GridSpec<f64> {
        GridSpec::new(0.0, 1000.0, 1024).unwrap()
    }

    #[test]
    fn gaussian_fwhm_from_crossings() {
        let s = sum_model(&[PeakModel::gaussian(500.0, 1.0, 10.0)], &grid()).unwrap();
        let st = measure_stats(&s, &FitConfig::default());
        assert!(!st.absent);
        assert!((st.mean_fwhm - 23.548).abs() <= 0.01 * 23.548);
        assert!(st.snr.is_infinite());
    }

    #[test]
    fn snr_of_noisy_gaussian() {
        let s = sum_model(&[PeakModel::gaussian(500.0, 1.0, 10.0)], &grid()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y = s.intensity().iter().map(|&v| v + noise.sample(&mut rng)).collect();
        let st = measure_stats(&s.with_intensity(y).unwrap(), &FitConfig::default());
        assert!((st.snr - 10.0).abs() <= 3.0, "snr {}", st.snr);
    }

    #[test]
    fn flat_spectrum_is_absent() {
        let g = grid();
        let s = Spectrum::on_grid(&g, vec![0.0; g.n_points], Modality::Raman).unwrap();
        let st = measure_stats(&s, &FitConfig::default());
        assert!(st.absent);
        assert_eq!(st.n_peaks, 0);
    }

    #[test]
    fn noise_sigma_of_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let y: Vec<f64> = (0..4096).map(|_| noise.sample(&mut rng)).collect();
        let s = noise_sigma(&y);
        assert!((s - 0.05).abs() < 0.01, "{s}");
    }
}
