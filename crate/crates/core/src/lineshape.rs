//! Amplitude-normalized line shapes and their analytic parameter gradients.
//!
//! Every shape reaches its amplitude `A` at the center `μ`:
//!
//! * Gaussian: `A exp(-(x-μ)² / 2σ²)`
//! * Lorentzian: `A γ² / ((x-μ)² + γ²)`
//! * Voigt: `A Re w(z) / Re w(z₀)` with `z = (x-μ + iγ) / σ√2`, `z₀ = iγ / σ√2`

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faddeeva::{erfcx, faddeeva, faddeeva_derivative};
use crate::scalar::Real;
use crate::spectrum::{GridSpec, Modality, Spectrum};

/// Line-shape family used as a physical prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakKind {
    Gaussian,
    Lorentzian,
    Voigt,
}

impl PeakKind {
    pub const ALL: [PeakKind; 3] = [PeakKind::Gaussian, PeakKind::Lorentzian, PeakKind::Voigt];

    pub fn as_str(self) -> &'static str {
        match self {
            PeakKind::Gaussian => "gaussian",
            PeakKind::Lorentzian => "lorentzian",
            PeakKind::Voigt => "voigt",
        }
    }

    pub fn uses_sigma(self) -> bool {
        !matches!(self, PeakKind::Lorentzian)
    }

    pub fn uses_gamma(self) -> bool {
        !matches!(self, PeakKind::Gaussian)
    }

    /// Number of free parameters of one peak of this kind.
    pub fn n_params(self) -> usize {
        match self {
            PeakKind::Voigt => 4,
            _ => 3,
        }
    }
}

impl fmt::Display for PeakKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PeakKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(PeakKind::Gaussian),
            "lorentzian" => Ok(PeakKind::Lorentzian),
            "voigt" => Ok(PeakKind::Voigt),
            other => Err(Error::Config(format!("unknown prior `{other}`"))),
        }
    }
}

/// One line-shape component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PeakModel<T: Real> {
    pub kind: PeakKind,
    pub center: T,
    pub amplitude: T,
    pub sigma: T,
    pub gamma: T,
}

/// Partial derivatives of a line shape with respect to its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeakGradient<T> {
    pub center: T,
    pub amplitude: T,
    pub sigma: T,
    pub gamma: T,
}

impl<T: Real> PeakModel<T> {
    pub fn gaussian(center: T, amplitude: T, sigma: T) -> Self {
        PeakModel { kind: PeakKind::Gaussian, center, amplitude, sigma, gamma: T::zero() }
    }

    pub fn lorentzian(center: T, amplitude: T, gamma: T) -> Self {
        PeakModel { kind: PeakKind::Lorentzian, center, amplitude, sigma: T::zero(), gamma }
    }

    pub fn voigt(center: T, amplitude: T, sigma: T, gamma: T) -> Self {
        PeakModel { kind: PeakKind::Voigt, center, amplitude, sigma, gamma }
    }

    /// Builds a peak of `kind` whose full width at half maximum is roughly `fwhm`.
    pub fn with_fwhm(kind: PeakKind, center: T, amplitude: T, fwhm: T) -> Self {
        let half = T::lit(0.5);
        match kind {
            PeakKind::Gaussian => Self::gaussian(center, amplitude, fwhm / gaussian_fwhm_factor()),
            PeakKind::Lorentzian => Self::lorentzian(center, amplitude, fwhm * half),
            // equal Gaussian and Lorentzian widths; Voigt FWHM ≈ 1.64 f_G at f_G = f_L
            PeakKind::Voigt => {
                let f = fwhm / T::lit(1.6376);
                Self::voigt(center, amplitude, f / gaussian_fwhm_factor(), f * half)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.center, self.amplitude, self.sigma, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Input("peak parameters must be finite".into()));
        }
        if self.amplitude <= T::zero() {
            return Err(Error::Input("peak amplitude must be positive".into()));
        }
        let ok = match self.kind {
            PeakKind::Gaussian => self.sigma > T::zero() && self.gamma == T::zero(),
            PeakKind::Lorentzian => self.gamma > T::zero() && self.sigma == T::zero(),
            PeakKind::Voigt => self.sigma > T::zero() && self.gamma > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid widths for {} peak", self.kind)))
        }
    }

    /// Analytic (or Olivero-Longbothum, for Voigt) full width at half maximum.
    pub fn fwhm(&self) -> T {
        let f_g = self.sigma * gaussian_fwhm_factor();
        let f_l = self.gamma * T::lit(2.0);
        match self.kind {
            PeakKind::Gaussian => f_g,
            PeakKind::Lorentzian => f_l,
            PeakKind::Voigt => T::lit(0.5346) * f_l + (T::lit(0.2166) * f_l * f_l + f_g * f_g).sqrt(),
        }
    }

    pub fn eval(&self, x: T) -> T {
        eval_lineshape(self, x)
    }
}

/// `2√(2 ln 2)`: Gaussian FWHM over σ.
pub fn gaussian_fwhm_factor<T: Real>() -> T {
    T::lit(2.0) * (T::lit(2.0) * T::LN_2()).sqrt()
}

struct VoigtTerms<T> {
    s: T,
    z: Complex<T>,
    w: Complex<T>,
    norm: T,
}

fn voigt_terms<T: Real>(p: &PeakModel<T>, x: T) -> VoigtTerms<T> {
    let s = p.sigma * T::SQRT_2();
    let z = Complex::new((x - p.center) / s, p.gamma / s);
    let w = faddeeva(z);
    let norm = erfcx(p.gamma / s);
    VoigtTerms { s, z, w, norm }
}

/// Value of line shape `p` at `x`.
pub fn eval_lineshape<T: Real>(p: &PeakModel<T>, x: T) -> T {
    let d = x - p.center;
    match p.kind {
        PeakKind::Gaussian => {
            let u = d / p.sigma;
            p.amplitude * (-(u * u) * T::lit(0.5)).exp()
        }
        PeakKind::Lorentzian => {
            let g2 = p.gamma * p.gamma;
            p.amplitude * g2 / (d * d + g2)
        }
        PeakKind::Voigt => {
            let t = voigt_terms(p, x);
            p.amplitude * t.w.re / t.norm
        }
    }
}

/// Analytic gradient of [`eval_lineshape`] over `(μ, A, σ, γ)`.
///
/// Components for parameters a kind does not use are zero.
pub fn lineshape_gradient<T: Real>(p: &PeakModel<T>, x: T) -> PeakGradient<T> {
    let d = x - p.center;
    let two = T::lit(2.0);
    match p.kind {
        PeakKind::Gaussian => {
            let u = d / p.sigma;
            let e = (-(u * u) * T::lit(0.5)).exp();
            let g = p.amplitude * e;
            PeakGradient {
                center: g * u / p.sigma,
                amplitude: e,
                sigma: g * u * u / p.sigma,
                gamma: T::zero(),
            }
        }
        PeakKind::Lorentzian => {
            let g2 = p.gamma * p.gamma;
            let q = d * d + g2;
            let q2 = q * q;
            PeakGradient {
                center: p.amplitude * g2 * two * d / q2,
                amplitude: g2 / q,
                sigma: T::zero(),
                gamma: p.amplitude * two * p.gamma * d * d / q2,
            }
        }
        PeakKind::Voigt => {
            let VoigtTerms { s, z, w, norm } = voigt_terms(p, x);
            let dw = faddeeva_derivative(z, w);
            let (u, v) = (z.re, z.im);
            let num = w.re;
            // ∂Re w/∂u = Re w', ∂Re w/∂v = -Im w'
            let dnum_du = dw.re;
            let dnum_dv = -dw.im;
            // d/dv erfcx(v) = 2 v erfcx(v) - 2/√π
            let dnorm_dv = two * v * norm - two / T::PI().sqrt();
            let dratio_dv = dnum_dv / norm - num * dnorm_dv / (norm * norm);
            let a = p.amplitude;
            PeakGradient {
                center: a * dnum_du / norm * (-T::one() / s),
                amplitude: num / norm,
                sigma: a * (dnum_du / norm * (-u / p.sigma) + dratio_dv * (-v / p.sigma)),
                gamma: a * dratio_dv / s,
            }
        }
    }
}

/// Pointwise sum of `peaks` sampled on grid `g`.
pub fn sum_model<T: Real>(peaks: &[PeakModel<T>], g: &GridSpec<T>) -> Result<Spectrum<T>> {
    let axis = g.axis();
    let intensity = axis
        .iter()
        .map(|&x| peaks.iter().fold(T::zero(), |acc, p| acc + eval_lineshape(p, x)))
        .collect();
    Spectrum::on_grid(g, intensity, Modality::Other)
}

/// Sum of `peaks` evaluated on an arbitrary axis.
pub fn sum_on_axis<T: Real>(peaks: &[PeakModel<T>], axis: &[T]) -> Vec<T> {
    axis.iter()
        .map(|&x| peaks.iter().fold(T::zero(), |acc, p| acc + eval_lineshape(p, x)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn gaussian_peak_and_half_max() {
        let p = PeakModel::gaussian(100.0, 1.0, 5.0);
        assert_eq!(p.eval(100.0), 1.0);
        let h = 5.0 * (2.0 * 2f64.ln()).sqrt();
        assert!((p.eval(100.0 + h) - 0.5).abs() < 1e-14);
        assert!((p.eval(100.0 - h) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lorentzian_half_max_at_gamma() {
        let p = PeakModel::lorentzian(0.0, 2.0, 3.0);
        assert_eq!(p.eval(3.0), 1.0);
        assert_eq!(p.eval(-3.0), 1.0);
    }

    #[test]
    fn voigt_peak_value_is_amplitude() {
        for &(s, g) in &[(1.0, 1.0), (0.2, 3.0), (4.0, 0.1)] {
            let p = PeakModel::<f64>::voigt(7.0, 0.6, s, g);
            assert!((p.eval(7.0) - 0.6).abs() < 1e-13);
        }
    }

    #[test]
    fn voigt_gaussian_limit() {
        let v = PeakModel::voigt(0.0, 1.0, 1.0, 1e-9);
        let g = PeakModel::gaussian(0.0, 1.0, 1.0);
        for k in -1000..=1000 {
            let x = k as f64 * 0.01;
            assert!((v.eval(x) - g.eval(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn voigt_matches_convolution_quadrature() {
        // independent oracle: direct numerical convolution of unit-area profiles
        let (sigma, gamma) = (1.3, 0.7);
        let conv = |x: f64| {
            let n = 200_000;
            let (lo, hi) = (-12.0 * sigma, 12.0 * sigma);
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let t = lo + i as f64 * h;
                let g = (-t * t / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                let d = x - t;
                let l = gamma / (std::f64::consts::PI * (d * d + gamma * gamma));
                let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += wgt * g * l;
            }
            acc * h
        };
        let p = PeakModel::voigt(0.0, 1.0, sigma, gamma);
        let peak = conv(0.0);
        for &x in &[0.3, 1.0, 2.5, 4.0] {
            assert!(rel_close(p.eval(x), conv(x) / peak, 1e-6), "x={x}");
        }
    }

    #[test]
    fn gradient_examples() {
        let p = PeakModel::<f64>::gaussian(100.0, 2.0, 5.0);
        assert_eq!(lineshape_gradient(&p, 100.0).center, 0.0);
        for &x in &[90.0, 97.0, 103.5] {
            let g = lineshape_gradient(&p, x);
            assert!((g.amplitude - p.eval(x) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let peaks = [
            PeakModel::gaussian(50.0, 0.8, 4.0),
            PeakModel::lorentzian(50.0, 0.8, 3.0),
            PeakModel::voigt(50.0, 0.8, 2.5, 1.5),
        ];
        for p in &peaks {
            let scale = p.fwhm();
            for &x in &[41.0, 47.3, 50.0, 52.2, 60.0] {
                let g = lineshape_gradient(p, x);
                let fd = |f: &dyn Fn(&mut PeakModel<f64>, f64), base: f64| {
                    let h = 1e-5 * base;
                    let mut a = *p;
                    let mut b = *p;
                    f(&mut a, h);
                    f(&mut b, -h);
                    (a.eval(x) - b.eval(x)) / (2.0 * h)
                };
                let dmu = fd(&|q, h| q.center += h, scale);
                let da = fd(&|q, h| q.amplitude += h, p.amplitude);
                assert!(rel_close(g.center, dmu, 1e-5), "{:?} x={x}: {} vs {}", p.kind, g.center, dmu);
                assert!(rel_close(g.amplitude, da, 1e-5));
                if p.kind.uses_sigma() {
                    let ds = fd(&|q, h| q.sigma += h, p.sigma);
                    assert!(rel_close(g.sigma, ds, 1e-5), "{:?} x={x}", p.kind);
                }
                if p.kind.uses_gamma() {
                    let dg = fd(&|q, h| q.gamma += h, p.gamma);
                    assert!(rel_close(g.gamma, dg, 1e-5), "{:?} x={x}", p.kind);
                }
            }
        }
    }

    #[test]
    fn sum_model_examples() {
        let g = GridSpec::new(0.0, 1000.0, 1001).unwrap();
        let empty = sum_model::<f64>(&[], &g).unwrap();
        assert!(empty.intensity().iter().all(|&v| v == 0.0));

        let p = PeakModel::gaussian(400.0, 0.7, 12.0);
        let one = sum_model(&[p], &g).unwrap();
        for (x, y) in one.axis().iter().zip(one.intensity()) {
            assert_eq!(*y, p.eval(*x));
        }

        let two = sum_model(&[p, PeakModel::gaussian(800.0, 0.9, 10.0)], &g).unwrap();
        assert!((two.max_intensity() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn validate_width_rules() {
        assert!(PeakModel::gaussian(0.0, 1.0, 1.0).validate().is_ok());
        assert!(PeakModel::gaussian(0.0, 1.0, 0.0).validate().is_err());
        assert!(PeakModel::lorentzian(0.0, 1.0, -1.0).validate().is_err());
        assert!(PeakModel::voigt(0.0, 1.0, 1.0, 0.0).validate().is_err());
        assert!(PeakModel::gaussian(0.0, 0.0, 1.0).validate().is_err());
    }

    #[test]
    fn single_precision_shapes() {
        let p = PeakModel::voigt(0.0f32, 1.0, 1.0, 0.5);
        assert!((p.eval(0.0) - 1.0).abs() < 1e-6);
        assert!((p.eval(1.2) - p.eval(-1.2)).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_peak() -> impl Strategy<Value = PeakModel<f64>> {
            (0usize..3, -100.0f64..100.0, 0.1f64..5.0, 0.1f64..20.0, 0.1f64..20.0).prop_map(
                |(k, mu, a, s, g)| match k {
                    0 => PeakModel::gaussian(mu, a, s),
                    1 => PeakModel::lorentzian(mu, a, g),
                    _ => PeakModel::voigt(mu, a, s, g),
                },
            )
        }

        proptest! {
            #[test]
            fn symmetric_about_center(p in any_peak(), d in 0.0f64..60.0) {
                prop_assert!((p.eval(p.center + d) - p.eval(p.center - d)).abs() < 1e-12);
            }

            #[test]
            fn bounded_by_amplitude(p in any_peak(), x in -200.0f64..200.0) {
                let v = p.eval(x);
                prop_assert!(v >= 0.0 && v <= p.amplitude * (1.0 + 1e-12));
            }
        }
    }
}
