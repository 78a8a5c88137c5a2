//! Classification harness: how much class information a set of spectra carries.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::stream_rng;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub rounds: usize,
    pub test_fraction: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { rounds: 10, test_fraction: 0.3, hidden: 128, epochs: 100, learning_rate: 1e-2, seed: 0 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.hidden == 0 || self.epochs == 0 {
            return Err(Error::Config("rounds, hidden and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config("test_fraction must be in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_accuracy: f64,
    /// `None` when every class was too small to contribute a test sample.
    pub test_accuracy: Option<f64>,
    /// `confusion[true][predicted]` over the test split.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub classes: Vec<String>,
    pub rounds: Vec<RoundResult>,
    pub mean_test_accuracy: Option<f64>,
}

/// Repeated stratified train/test classification with a one-hidden-layer
/// network on raw intensities.
pub fn classify_information_transfer(
    samples: &[(Spectrum<f64>, String)],
    cfg: &ClassifierConfig,
) -> Result<ClassificationResult> {
    cfg.validate()?;
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (_, label)) in samples.iter().enumerate() {
        by_class.entry(label.as_str()).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::Config(format!("classification needs at least 2 classes, got {}", by_class.len())));
    }
    let dim = samples[0].0.len();
    if samples.iter().any(|(s, _)| s.len() != dim) {
        return Err(Error::Input("all spectra must have the same length".into()));
    }
    let classes: Vec<String> = by_class.keys().map(|k| k.to_string()).collect();
    let x = Array2::from_shape_fn((samples.len(), dim), |(r, c)| samples[r].0.intensity()[c]);
    let labels: Vec<usize> = samples
        .iter()
        .map(|(_, l)| classes.binary_search(l).expect("label collected above"))
        .collect();

    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut rng = stream_rng(cfg.seed, &format!("classify-round-{round}"));
        let (train_idx, test_idx) = stratified_split(&by_class, cfg.test_fraction, &mut rng);
        let xt = x.select(Axis(0), &train_idx);
        let yt: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let net = Mlp::fit(&xt, &yt, classes.len(), cfg, &mut rng);
        let train_pred = net.predict(&xt);
        let train_accuracy = accuracy(&train_pred, &yt);
        let mut confusion = vec![vec![0; classes.len()]; classes.len()];
        let test_accuracy = if test_idx.is_empty() {
            None
        } else {
            let xs = x.select(Axis(0), &test_idx);
            let ys: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
            let pred = net.predict(&xs);
            for (&t, &p) in ys.iter().zip(&pred) {
                confusion[t][p] += 1;
            }
            Some(accuracy(&pred, &ys))
        };
        rounds.push(RoundResult {
            round,
            n_train: train_idx.len(),
            n_test: test_idx.len(),
            train_accuracy,
            test_accuracy,
            confusion,
        });
    }
    let tested: Vec<f64> = rounds.iter().filter_map(|r| r.test_accuracy).collect();
    let mean_test_accuracy = (!tested.is_empty()).then(|| tested.iter().sum::<f64>() / tested.len() as f64);
    Ok(ClassificationResult { classes, rounds, mean_test_accuracy })
}

/// Per class: shuffle, then move `round(fraction·n)` samples to test while
/// keeping at least one in train.
fn stratified_split<R: Rng>(
    by_class: &BTreeMap<&str, Vec<usize>>,
    fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.values() {
        let mut m = members.clone();
        m.shuffle(rng);
        let n_test = ((fraction * m.len() as f64).round() as usize).min(m.len() - 1);
        test.extend_from_slice(&m[..n_test]);
        train.extend_from_slice(&m[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

impl Mlp {
    fn init<R: Rng>(n_in: usize, hidden: usize, n_out: usize, rng: &mut R) -> Self {
        let bound1 = 1.0 / (n_in as f64).sqrt();
        let bound2 = 1.0 / (hidden as f64).sqrt();
        Mlp {
            w1: Array2::from_shape_fn((n_in, hidden), |_| rng.random_range(-bound1..bound1)),
            b1: Array1::zeros(hidden),
            w2: Array2::from_shape_fn((hidden, n_out), |_| rng.random_range(-bound2..bound2)),
            b2: Array1::zeros(n_out),
        }
    }

    fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        (x.dot(&self.w1) + &self.b1).mapv(f64::tanh)
    }

    fn probabilities(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut logits = h.dot(&self.w2) + &self.b2;
        for mut row in logits.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
        }
        logits
    }

    fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.probabilities(&self.hidden(x))
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                    .0
            })
            .collect()
    }

    /// Full-batch Adam on softmax cross-entropy.
    fn fit<R: Rng>(x: &Array2<f64>, y: &[usize], n_classes: usize, cfg: &ClassifierConfig, rng: &mut R) -> Self {
        let mut net = Mlp::init(x.ncols(), cfg.hidden, n_classes, rng);
        let n = x.nrows() as f64;
        let mut adam = [
            AdamSlot::new(net.w1.len()),
            AdamSlot::new(net.b1.len()),
            AdamSlot::new(net.w2.len()),
            AdamSlot::new(net.b2.len()),
        ];
        for step in 1..=cfg.epochs {
            let h = net.hidden(x);
            let mut d_logits = net.probabilities(&h);
            for (mut row, &t) in d_logits.rows_mut().into_iter().zip(y) {
                row[t] -= 1.0;
            }
            d_logits /= n;
            let g_w2 = h.t().dot(&d_logits);
            let g_b2 = d_logits.sum_axis(Axis(0));
            let d_pre = d_logits.dot(&net.w2.t()) * &h.mapv(|v| 1.0 - v * v);
            let g_w1 = x.t().dot(&d_pre);
            let g_b1 = d_pre.sum_axis(Axis(0));
            let lr = cfg.learning_rate;
            adam[0].step(net.w1.as_slice_mut().expect("standard layout"), g_w1.as_slice().expect("standard layout"), lr, step);
            adam[1].step(net.b1.as_slice_mut().expect("standard layout"), g_b1.as_slice().expect("standard layout"), lr, step);
            adam[2].step(net.w2.as_slice_mut().expect("standard layout"), g_w2.as_slice().expect("standard layout"), lr, step);
            adam[3].step(net.b2.as_slice_mut().expect("standard layout"), g_b2.as_slice().expect("standard layout"), lr, step);
        }
        net
    }
}

struct AdamSlot {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamSlot {
    fn new(n: usize) -> Self {
        AdamSlot { m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64, t: usize) {
        let (b1, b2) = (0.9_f64, 0.999_f64);
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        for i in 0..p.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::{sum_model, PeakModel};
    use crate::spectrum::GridSpec;
    use rand_distr::{Distribution, Normal};

    fn two_class_set(n_per_class: usize, seed: u64) -> Vec<(Spectrum<f64>, String)> {
        let g = GridSpec::new(0.0, 1000.0, 256).unwrap();
        let mut rng = stream_rng(seed, "test-noise");
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut out = Vec::new();
        for (center, label) in [(300.0, "a"), (700.0, "b")] {
            for _ in 0..n_per_class {
                let s = sum_model(&[PeakModel::gaussian(center, 1.0, 20.0)], &g).unwrap();
                let y = s.intensity().iter().map(|v| v + noise.sample(&mut rng)).collect();
                out.push((s.with_intensity(y).unwrap(), label.to_string()));
            }
        }
        out
    }

    #[test]
    fn single_class_is_a_config_error() {
        let mut set = two_class_set(3, 1);
        set.iter_mut().for_each(|s| s.1 = "a".into());
        assert!(matches!(classify_information_transfer(&set, &ClassifierConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn round_count_and_confusion_rows() {
        let set = two_class_set(10, 2);
        let cfg = ClassifierConfig { rounds: 4, epochs: 30, ..Default::default() };
        let res = classify_information_transfer(&set, &cfg).unwrap();
        assert_eq!(res.rounds.len(), 4);
        assert_eq!(res.classes, vec!["a".to_string(), "b".to_string()]);
        for r in &res.rounds {
            assert_eq!(r.n_train + r.n_test, 20);
            // 3 of 10 per class go to test
            for row in &r.confusion {
                assert_eq!(row.iter().sum::<usize>(), 3);
            }
        }
    }

    #[test]
    fn singleton_classes_stay_in_train() {
        let mut set = two_class_set(5, 3);
        set.truncate(6);
        let cfg = ClassifierConfig { rounds: 2, epochs: 10, test_fraction: 0.5, ..Default::default() };
        let res = classify_information_transfer(&set, &cfg).unwrap();
        for r in &res.rounds {
            assert_eq!(r.confusion[1].iter().sum::<usize>(), 0);
            assert_eq!(r.n_train, 2 + 1);
        }
    }

    #[test]
    fn no_test_split_reports_none() {
        let set = two_class_set(4, 4);
        let cfg = ClassifierConfig { rounds: 1, epochs: 5, test_fraction: 0.0, ..Default::default() };
        let res = classify_information_transfer(&set, &cfg).unwrap();
        assert_eq!(res.rounds[0].test_accuracy, None);
        assert_eq!(res.mean_test_accuracy, None);
    }

    #[test]
    fn deterministic_given_seed() {
        let set = two_class_set(6, 5);
        let cfg = ClassifierConfig { rounds: 2, epochs: 20, ..Default::default() };
        assert_eq!(
            classify_information_transfer(&set, &cfg).unwrap(),
            classify_information_transfer(&set, &cfg).unwrap()
        );
    }
}
