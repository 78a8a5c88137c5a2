use spectral_transfer::config::RunConfig;
use spectral_transfer::data::PairManifest;
use spectral_transfer::genmodel::{train, Conditioning, ModelConfig};
use spectral_transfer::lineshape::sum_model;
use spectral_transfer::{GridSpec, Modality, PeakKind, PeakModel};
use spectral_transfer::pipeline;

type Pairs = Vec<(Vec<f64>, Vec<f64>)>;

fn single_pair() -> (ModelConfig, Conditioning<f64>, Pairs) {
    let grid = GridSpec::new(0.0, 63.0, 64).unwrap();
    let a = sum_model(&[PeakModel::gaussian(20.0, 1.0, 4.0)], &grid).unwrap();
    let b = sum_model(&[PeakModel::gaussian(35.0, 0.8, 6.0), PeakModel::gaussian(50.0, 0.4, 2.0)], &grid).unwrap();
    let mut x: Vec<f64> = a.intensity().to_vec();
    x.extend([1.0, 20.0 / 63.0, 1.0, 4.0 / 63.0, 0.0]);
    let cfg = ModelConfig {
        input_len: 64,
        feature_len: 5,
        latent_dim: 4,
        hidden_dims: vec![32, 16],
        epochs: 2000,
        batch_size: 1,
        ..ModelConfig::default()
    };
    let cond = Conditioning {
        prior: PeakKind::Gaussian,
        k_max: 1,
        source_modality: Modality::Ir,
        source_grid: grid,
        target_modality: Modality::Raman,
        target_grid: grid,
    };
    (cfg, cond, vec![(x, b.intensity().to_vec())])
}

#[test]
fn single_pair_overfits() {
    let (cfg, cond, data) = single_pair();
    let out = train(&data, &cfg, &cond).unwrap();
    let last = out.history.last().unwrap();
    assert_eq!(out.history.len(), 2000);
    // recon is summed over the grid; the threshold is on the per-point mean
    let mse = last.recon / cfg.input_len as f64;
    assert!(mse < 1e-3, "per-point recon {mse}");

    let (mu, _) = out.model.encode(&data[0].0).unwrap();
    let y = out.model.decode(&mu).unwrap();
    let target = &data[0].1;
    let rmse = (y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    assert!(rmse < 0.02, "rmse {rmse}");
}

#[test]
fn smoothed_loss_trends_down_on_synthetic_task() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    pipeline::synth(&cfg, &dir.path().join("data")).unwrap();
    let manifest = PairManifest::load(&dir.path().join("data").join(pipeline::MANIFEST_FILE)).unwrap();
    let out = pipeline::train(&cfg, &manifest, cfg.prior, "trend", &dir.path().join("run")).unwrap();
    let mut smoothed = Vec::with_capacity(out.history.len());
    for e in &out.history {
        let prev = smoothed.last().copied().unwrap_or(e.total);
        smoothed.push(0.1 * e.total + 0.9 * prev);
    }
    let n = smoothed.len();
    assert!(smoothed[n - 1] <= smoothed[n / 2 - 1], "{} > {}", smoothed[n - 1], smoothed[n / 2 - 1]);
}
