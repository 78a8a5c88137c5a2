//! Pairwise spectrum similarity metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectrum::Spectrum;

pub const SSIM_WINDOW: usize = 11;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Similarity of a generated spectrum to its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PairMetrics<T: Real> {
    pub ssim: T,
    pub rmse: T,
    /// Decibels with peak value 1; infinite for identical spectra.
    #[serde(with = "crate::serde_special")]
    pub psnr: T,
    pub correlation: T,
    pub auc_generated: T,
    pub auc_truth: T,
}

fn check_lengths<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Input(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

pub fn rmse<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    check_lengths(a, b)?;
    let mse = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() / T::from_usize_lossy(a.len());
    Ok(mse.sqrt())
}

/// `-20 log₁₀(rmse)`, i.e. `10 log₁₀(1/mse)` for unit peak value.
pub fn psnr_from_rmse<T: Real>(rmse: T) -> T {
    if rmse == T::zero() {
        T::infinity()
    } else {
        -T::lit(20.0) * rmse.log10()
    }
}

/// Pearson correlation; zero variance in either input is an error.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    check_lengths(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == T::zero() || sbb == T::zero() {
        return Err(Error::Degenerate("correlation undefined for zero-variance input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).max(-T::one()).min(T::one()))
}

/// Mean structural similarity over sliding windows of `window` samples with
/// uniform weights (a shorter signal is one window).
pub fn ssim_1d<T: Real>(a: &[T], b: &[T], window: usize) -> Result<T> {
    check_lengths(a, b)?;
    let w = window.clamp(1, a.len());
    let c1 = T::lit(SSIM_C1);
    let c2 = T::lit(SSIM_C2);
    let two = T::lit(2.0);
    let count = a.len() - w + 1;
    let mut total = T::zero();
    for start in 0..count {
        let (wa, wb) = (&a[start..start + w], &b[start..start + w]);
        let (ma, mb) = (mean(wa), mean(wb));
        let n = T::from_usize_lossy(w);
        let (mut va, mut vb, mut cov) = (T::zero(), T::zero(), T::zero());
        for (&x, &y) in wa.iter().zip(wb) {
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
            cov += (x - ma) * (y - mb);
        }
        let (va, vb, cov) = (va / n, vb / n, cov / n);
        if wa == wb {
            total += T::one();
            continue;
        }
        total += ((two * ma * mb + c1) * (two * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / T::from_usize_lossy(count))
}

/// Trapezoidal integral of `y` over `x`.
pub fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) * T::lit(0.5))
        .sum()
}

/// All pairwise metrics; both spectra must share the same axis.
pub fn pair_metrics<T: Real>(generated: &Spectrum<T>, truth: &Spectrum<T>) -> Result<PairMetrics<T>> {
    if generated.axis() != truth.axis() {
        return Err(Error::Input("generated and truth spectra are on different grids".into()));
    }
    let (g, t) = (generated.intensity(), truth.intensity());
    let rmse = rmse(g, t)?;
    Ok(PairMetrics {
        ssim: ssim_1d(g, t, SSIM_WINDOW)?,
        rmse,
        psnr: psnr_from_rmse(rmse),
        correlation: pearson(g, t)?,
        auc_generated: trapezoid(generated.axis(), g),
        auc_truth: trapezoid(truth.axis(), t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Modality;

    fn spec(y: Vec<f64>) -> Spectrum<f64> {
        let x = (0..y.len()).map(|i| i as f64).collect();
        Spectrum::new(x, y, Modality::Raman).unwrap()
    }

    fn bumpy(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i as f64) * 0.3).sin() * 0.5 + 0.5).collect()
    }

    #[test]
    fn identical_spectra() {
        let s = spec(bumpy(64));
        let m = pair_metrics(&s, &s).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.ssim, 1.0);
        assert!((m.correlation - 1.0).abs() < 1e-12);
        assert!(m.psnr.is_infinite() && m.psnr > 0.0);
        assert_eq!(m.auc_generated, m.auc_truth);
    }

    #[test]
    fn toy_rmse_and_psnr() {
        let r = rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(psnr_from_rmse(r), 0.0);
        assert!(matches!(pearson(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::Degenerate(_))));
        assert!(matches!(pair_metrics(&spec(vec![0.0, 0.0]), &spec(vec![1.0, 1.0])), Err(Error::Degenerate(_))));
    }

    #[test]
    fn affine_truth_keeps_correlation() {
        let g: Vec<f64> = (0..50).map(|i| 0.3 + 0.01 * i as f64).collect();
        let t: Vec<f64> = g.iter().map(|v| 2.0 * v - 0.5).collect();
        let m = pair_metrics(&spec(g), &spec(t)).unwrap();
        assert!((m.correlation - 1.0).abs() < 1e-12);
        assert!(m.rmse > 0.0);
    }

    #[test]
    fn grid_mismatch_is_input_error() {
        let a = spec(bumpy(10));
        let b = Spectrum::new((0..10).map(|i| i as f64 * 2.0).collect(), bumpy(10), Modality::Raman).unwrap();
        assert!(matches!(pair_metrics(&a, &b), Err(Error::Input(_))));
    }

    #[test]
    fn psnr_consistent_with_rmse() {
        let a = spec(bumpy(100));
        let b = spec(bumpy(100).iter().map(|v| v * 0.9 + 0.02).collect());
        let m = pair_metrics(&a, &b).unwrap();
        assert_eq!(m.psnr, -20.0 * m.rmse.log10());
    }

    #[test]
    fn ssim_drops_for_different_signals() {
        let a = bumpy(80);
        let b: Vec<f64> = a.iter().rev().copied().collect();
        assert!(ssim_1d(&a, &b, SSIM_WINDOW).unwrap() < 0.9);
    }

    #[test]
    fn trapezoid_of_line() {
        assert_eq!(trapezoid(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]), 2.0);
    }
}
