use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
seed = 11

[synth]
n_pairs = 10

[model]
latent_dim = 4
hidden_dims = [16, 8]
epochs = 3
"#;

fn run(args: &[&str], cwd: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_spectral-transfer"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .expect("run binary")
        .status
        .code()
        .unwrap_or(-1)
}

fn small_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()), 1);
    assert_eq!(run(&["train"], dir.path()), 1);
    assert_eq!(run(&["fit", "--input", "x.txt"], dir.path()), 1);
    assert_eq!(run(&["--help"], dir.path()), 0);
}

#[test]
fn bad_inputs_exit_two() {
    let dir = small_dir();
    let p = dir.path();
    assert_eq!(run(&["train", "--manifest", "missing.csv"], p), 2);
    std::fs::write(p.join("bad.toml"), "k_max = 3\n").unwrap();
    assert_eq!(run(&["synth", "--config", "bad.toml"], p), 2);
    std::fs::write(p.join("bad.txt"), "##NAMES=x\n1, 2\n1, 3\n").unwrap();
    assert_eq!(run(&["fit", "--input", "bad.txt", "--modality", "ir"], p), 2);
}

#[test]
fn small_pipeline_and_mismatched_manifests() {
    let dir = small_dir();
    let p = dir.path();
    fn with<'a>(args: &[&'a str]) -> Vec<&'a str> {
        [args, &["--config", "small.toml"][..]].concat()
    }
    assert_eq!(run(&with(&["synth", "--out-dir", "data"]), p), 0);
    assert_eq!(run(&with(&["train", "--manifest", "data/manifest.csv", "--out-dir", "g"]), p), 0);
    assert_eq!(run(&with(&["train", "--manifest", "data/manifest.csv", "--prior", "lorentzian", "--out-dir", "l"]), p), 0);
    assert_eq!(
        run(&with(&["generate", "--checkpoint", "g/checkpoint.json", "--manifest", "data/manifest.csv", "--out-dir", "gen"]), p),
        0
    );
    assert_eq!(
        run(&with(&["evaluate", "--manifest", "data/manifest.csv", "--generated", "gen/generated.csv", "--out-dir", "eval"]), p),
        0
    );
    assert_eq!(run(&with(&["analyze", "g", "l", "--out-dir", "an"]), p), 0);
    for f in ["eval/report.json", "eval/run.json", "an/analysis.json", "an/pca.svg", "g/loss.svg"] {
        assert!(p.join(f).is_file(), "{f}");
    }
    let record = std::fs::read_to_string(p.join("eval/run.json")).unwrap();
    assert!(record.contains("config_sha256"));

    // truth manifest without the generated samples
    let text = std::fs::read_to_string(p.join("data/manifest.csv")).unwrap();
    let header = text.lines().next().unwrap();
    let train_only: Vec<&str> = text.lines().skip(1).filter(|l| l.contains(",train,")).collect();
    std::fs::write(p.join("data/train_only.csv"), format!("{header}\n{}\n", train_only.join("\n"))).unwrap();
    assert_eq!(
        run(&with(&["evaluate", "--manifest", "data/train_only.csv", "--generated", "gen/generated.csv", "--out-dir", "e2"]), p),
        2
    );
}

#[test]
fn strict_fit_failure_exits_three() {
    let dir = small_dir();
    let p = dir.path();
    assert_eq!(run(&["synth", "--config", "small.toml", "--out-dir", "data"], p), 0);
    std::fs::write(p.join("short.toml"), format!("{SMALL}\n[fit]\nmax_iterations = 1\n")).unwrap();
    let args = ["fit", "--config", "short.toml", "--manifest", "data/manifest.csv", "--out-dir", "fits"];
    assert_eq!(run(&[&args[..], &["--strict"]].concat(), p), 3);
    assert_eq!(run(&args, p), 0);
}
