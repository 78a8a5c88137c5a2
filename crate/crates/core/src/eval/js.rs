//! Jensen–Shannon divergence between two scalar sample sets.

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 20;
const SMOOTHING: f64 = 1e-12;

/// Histograms both sets on their shared min–max range and returns the JS
/// divergence in nats, in `[0, ln 2]`.
pub fn js_divergence(a: &[f64], b: &[f64], n_bins: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("js_divergence needs two non-empty sample sets".into()));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be positive".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("js_divergence samples must be finite".into()));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let p = histogram(a, lo, hi, n_bins);
    let q = histogram(b, lo, hi, n_bins);
    let mut js = 0.0;
    for (&pi, &qi) in p.iter().zip(&q) {
        let mi = 0.5 * (pi + qi);
        js += 0.5 * pi * (pi / mi).ln() + 0.5 * qi * (qi / mi).ln();
    }
    Ok(js.clamp(0.0, std::f64::consts::LN_2))
}

fn histogram(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let mut counts = vec![SMOOTHING; n_bins];
    let width = hi - lo;
    for &v in samples {
        let bin = if width > 0.0 {
            (((v - lo) / width * n_bins as f64) as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[bin] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_sets_have_zero_divergence() {
        let a = [0.1, 0.4, 0.4, 0.9, 2.0];
        assert_eq!(js_divergence(&a, &a, DEFAULT_BINS).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports_reach_ln2() {
        let a = [0.0, 0.1, 0.2];
        let b = [5.0, 5.5, 6.0];
        let js = js_divergence(&a, &b, DEFAULT_BINS).unwrap();
        assert!((js - std::f64::consts::LN_2).abs() < 1e-6, "{js}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(js_divergence(&[], &[1.0], 20), Err(Error::Input(_))));
        assert!(matches!(js_divergence(&[1.0], &[], 20), Err(Error::Input(_))));
    }

    fn normal_samples(mean: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mean, 1.0).unwrap();
        (0..1000).map(|_| d.sample(&mut rng)).collect()
    }

    /// Direct evaluation with explicit bin edges and base-e logs.
    fn reference(a: &[f64], b: &[f64], n: usize) -> f64 {
        let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
        let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
        let mut edges: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        edges[n] = hi;
        let hist = |s: &[f64]| -> Vec<f64> {
            let mut c: Vec<f64> = (0..n)
                .map(|k| {
                    s.iter()
                        .filter(|&&v| v >= edges[k] && (v < edges[k + 1] || (k == n - 1 && v <= edges[n])))
                        .count() as f64
                        + 1e-12
                })
                .collect();
            let t: f64 = c.iter().sum();
            c.iter_mut().for_each(|v| *v /= t);
            c
        };
        let (p, q) = (hist(a), hist(b));
        let kl = |x: &[f64], m: &[f64]| x.iter().zip(m).map(|(a, b)| a * (a / b).ln()).sum::<f64>();
        let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)
    }

    #[test]
    fn shifted_normals_match_direct_histogram() {
        let a = normal_samples(0.0, 1);
        let b = normal_samples(0.5, 2);
        let js = js_divergence(&a, &b, DEFAULT_BINS).unwrap();
        assert!(js > 0.0 && js < std::f64::consts::LN_2);
        let r = reference(&a, &b, DEFAULT_BINS);
        assert!((js - r).abs() < 1e-12, "{js} vs {r}");
        assert_eq!(js, js_divergence(&normal_samples(0.0, 1), &normal_samples(0.5, 2), DEFAULT_BINS).unwrap());
    }

    #[test]
    fn symmetric() {
        let a = normal_samples(0.0, 3);
        let b = normal_samples(1.0, 4);
        let ab = js_divergence(&a, &b, 13).unwrap();
        let ba = js_divergence(&b, &a, 13).unwrap();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn constant_samples_share_one_bin() {
        assert!(js_divergence(&[2.0, 2.0], &[2.0], 20).unwrap() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn bounded_and_symmetric(
            a in proptest::collection::vec(-100.0f64..100.0, 1..50),
            b in proptest::collection::vec(-100.0f64..100.0, 1..50),
            bins in 1usize..40,
        ) {
            let ab = js_divergence(&a, &b, bins).unwrap();
            let ba = js_divergence(&b, &a, bins).unwrap();
            proptest::prop_assert!((0.0..=std::f64::consts::LN_2).contains(&ab));
            proptest::prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
