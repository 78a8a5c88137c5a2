use super::*;
use crate::deconstruct::{fit_deconstruction, FitConfig};
use crate::lineshape::{sum_model, PeakModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) fn tiny_config() -> (ModelConfig, Conditioning<f64>) {
    let grid = GridSpec::new(0.0, 7.0, 8).unwrap();
    let cfg = ModelConfig {
        input_len: 8,
        feature_len: 5,
        latent_dim: 2,
        hidden_dims: vec![6, 4],
        beta_kl: 0.3,
        learning_rate: 1e-2,
        epochs: 5,
        batch_size: 2,
        seed: 3,
    };
    let cond = Conditioning {
        prior: PeakKind::Gaussian,
        k_max: 1,
        source_modality: Modality::Ir,
        source_grid: grid,
        target_modality: Modality::Raman,
        target_grid: grid,
    };
    (cfg, cond)
}

pub(crate) fn scrambled_tiny_model(seed: u64) -> GenerativeModel<f64> {
    let (cfg, cond) = tiny_config();
    let mut m = GenerativeModel::new(cfg, cond).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in m.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-0.6..0.6);
        }
    }
    m
}

#[test]
fn zero_input_with_zero_heads_gives_standard_posterior() {
    let mut m = scrambled_tiny_model(4);
    m.phi.mu_head = Dense::zeros(4, 2);
    m.phi.log_var_head = Dense::zeros(4, 2);
    let (mu, lv) = m.encode(&[0.7; 13]).unwrap();
    assert_eq!(mu, vec![0.0, 0.0]);
    assert_eq!(lv, vec![0.0, 0.0]);
}

#[test]
fn encode_shapes_and_determinism() {
    let m = scrambled_tiny_model(1);
    let x: Vec<f64> = (0..13).map(|i| i as f64 * 0.1).collect();
    let a = m.encode(&x).unwrap();
    let b = m.encode(&x).unwrap();
    assert_eq!(a.0.len(), 2);
    assert_eq!(a.1.len(), 2);
    assert_eq!(a, b);
}

#[test]
fn encode_rejects_bad_input() {
    let m = scrambled_tiny_model(1);
    let mut x = vec![0.0; 13];
    x[4] = f64::NAN;
    assert!(matches!(m.encode(&x), Err(Error::Input(_))));
    assert!(matches!(m.encode(&[0.0; 12]), Err(Error::Input(_))));
    assert!(matches!(m.decode(&[f64::INFINITY, 0.0]), Err(Error::Input(_))));
}

#[test]
fn decode_is_bounded_with_right_length() {
    let m = scrambled_tiny_model(2);
    for z in [[0.0, 0.0], [50.0, -50.0], [-3.0, 7.0]] {
        let y = m.decode(&z).unwrap();
        assert_eq!(y.len(), 8);
        assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn reparameterize_examples() {
    let mu = [0.5, -1.0, 2.0];
    let s = reparameterize_with(&mu, &[0.3, 0.1, -0.2], &[0.0; 3]);
    assert_eq!(s.z, mu.to_vec());
    let s = reparameterize_with(&mu, &[0.0; 3], &[1.0; 3]);
    assert_eq!(s.z, vec![1.5, 0.0, 3.0]);
    let a = reparameterize(&mu, &[0.0; 3], &mut ChaCha8Rng::seed_from_u64(9));
    let b = reparameterize(&mu, &[0.0; 3], &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
}

#[test]
fn kl_examples() {
    assert_eq!(kl_divergence(&[0.0f64], &[0.0]), 0.0);
    assert!((kl_divergence(&[1.0f64], &[0.0]) - 0.5).abs() < 1e-15);
    let expected = 0.5 * (4.0 - 1.0 - 4f64.ln());
    assert!((kl_divergence(&[0.0f64], &[4f64.ln()]) - expected).abs() < 1e-15);
    assert!((expected - 0.8069).abs() < 1e-4);
}

#[test]
fn kl_is_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lv: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        assert!(kl_divergence(&mu, &lv) >= 0.0);
    }
}

#[test]
fn loss_is_zero_when_decoder_hits_target() {
    let (cfg, cond) = tiny_config();
    let m = GenerativeModel::new(cfg, cond).unwrap();
    let x = Array2::<f64>::zeros((1, 13));
    let eps = Array2::<f64>::zeros((1, 2));
    let y = Array2::from_shape_vec((1, 8), m.decode(&[0.0, 0.0]).unwrap()).unwrap();
    let parts = m.loss_with_noise(x.view(), y.view(), eps.view());
    assert_eq!(parts.total, 0.0);
}

#[test]
fn zero_beta_total_equals_recon() {
    let mut m = scrambled_tiny_model(4);
    m.config.beta_kl = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_simple_fn((3, 13), || rng.random_range(0.0..1.0));
    let y = Array2::from_shape_simple_fn((3, 8), || rng.random_range(0.0..1.0));
    let eps = noise_matrix::<f64, _>(3, 2, &mut rng);
    let parts = m.loss_with_noise(x.view(), y.view(), eps.view());
    assert!(parts.kl > 0.0);
    assert_eq!(parts.total, parts.recon);
}

#[test]
fn backprop_matches_finite_differences() {
    let mut m = scrambled_tiny_model(8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Array2::from_shape_simple_fn((3, 13), || rng.random_range(0.0..1.0));
    let y = Array2::from_shape_simple_fn((3, 8), || rng.random_range(0.0..1.0));
    let eps = noise_matrix::<f64, _>(3, 2, &mut rng);
    let (_, grads) = m.loss_and_gradient(x.view(), y.view(), eps.view());
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    for ti in 0..analytic.len() {
        for k in 0..analytic[ti].len() {
            let orig = m.tensors()[ti][k];
            m.tensors_mut()[ti][k] = orig + h;
            let up = m.loss_with_noise(x.view(), y.view(), eps.view()).total;
            m.tensors_mut()[ti][k] = orig - h;
            let down = m.loss_with_noise(x.view(), y.view(), eps.view()).total;
            m.tensors_mut()[ti][k] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = analytic[ti][k];
            let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-7);
            worst = worst.max(err);
            probes += 1;
        }
    }
    assert!(probes >= 50);
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn training_is_deterministic_and_reports_every_epoch() {
    let (cfg, cond) = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<(Vec<f64>, Vec<f64>)> = (0..5)
        .map(|_| {
            ((0..13).map(|_| rng.random_range(0.0..1.0)).collect(), (0..8).map(|_| rng.random_range(0.0..1.0)).collect())
        })
        .collect();
    let a = train(&data, &cfg, &cond).unwrap();
    let b = train(&data, &cfg, &cond).unwrap();
    assert_eq!(a.history.len(), cfg.epochs);
    let bits = |h: &[EpochLoss]| h.iter().map(|e| e.total.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.history), bits(&b.history));
    assert_eq!(a.model, b.model);
}

#[test]
fn empty_dataset_is_config_error() {
    let (cfg, cond) = tiny_config();
    assert!(matches!(train::<f64>(&[], &cfg, &cond), Err(Error::Config(_))));
}

#[test]
fn mismatched_conditioning_is_rejected() {
    let (mut cfg, cond) = tiny_config();
    cfg.feature_len = 9;
    assert!(matches!(GenerativeModel::new(cfg, cond), Err(Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let m = scrambled_tiny_model(12);
    let text = checkpoint::to_string(&m).unwrap();
    let back: GenerativeModel<f64> = checkpoint::from_str(&text).unwrap();
    assert_eq!(back, m);
    assert!(checkpoint::from_str::<f32>(&text).is_err());
}

#[test]
fn generate_checks_grid_and_is_deterministic() {
    let (_, cond) = tiny_config();
    let m = scrambled_tiny_model(6);
    let s = sum_model(&[PeakModel::gaussian(3.0, 1.0, 1.0)], &cond.source_grid).unwrap();
    let d = fit_deconstruction(&s, PeakKind::Gaussian, &FitConfig::default()).unwrap();
    let a = m.generate(&s, &d).unwrap();
    let b = m.generate(&s, &d).unwrap();
    assert_eq!(a, b);
    assert!(a.min_intensity() >= 0.0 && a.max_intensity() <= 1.0);

    let other = GridSpec::new(0.0, 14.0, 8).unwrap();
    let s2 = sum_model(&[PeakModel::gaussian(3.0, 1.0, 1.0)], &other).unwrap();
    assert!(matches!(m.generate(&s2, &d), Err(Error::Config(_))));
    let d_l = fit_deconstruction(&s, PeakKind::Lorentzian, &FitConfig::default()).unwrap();
    assert!(matches!(m.generate(&s, &d_l), Err(Error::Config(_))));
}

#[test]
fn single_precision_model_trains() {
    let grid = GridSpec::new(0.0f32, 7.0, 8).unwrap();
    let cond = Conditioning {
        prior: PeakKind::Gaussian,
        k_max: 1,
        source_modality: Modality::Ir,
        source_grid: grid,
        target_modality: Modality::Raman,
        target_grid: grid,
    };
    let (cfg, _) = tiny_config();
    let data = vec![(vec![0.5f32; 13], vec![0.25f32; 8])];
    let out = train(&data, &cfg, &cond).unwrap();
    assert!(out.history.iter().all(|e| e.total.is_finite()));
}

#[test]
fn flat_parameters_round_trip() {
    let m = scrambled_tiny_model(5);
    let p = m.parameters();
    assert_eq!(p.len(), m.n_parameters());
    let mut other = scrambled_tiny_model(6);
    other.set_parameters(&p).unwrap();
    assert_eq!(other, m);
    assert!(matches!(other.set_parameters(&p[1..]), Err(Error::Input(_))));
}
