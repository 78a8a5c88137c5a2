use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spectral_transfer::config::RunConfig;
use spectral_transfer::data::manifest::{build_manifest, PairManifest};
use spectral_transfer::data::rruff::read_rruff;
use spectral_transfer::genmodel::checkpoint;
use spectral_transfer::pipeline::{self, Side};
use spectral_transfer::{Error, Modality, PeakKind};

#[derive(Parser)]
#[command(name = "spectral-transfer", version, about = "Spectral deconvolution and cross-modality spectrum transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the top-level seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prior {
    Gaussian,
    Lorentzian,
    Voigt,
}

impl From<Prior> for PeakKind {
    fn from(p: Prior) -> Self {
        match p {
            Prior::Gaussian => PeakKind::Gaussian,
            Prior::Lorentzian => PeakKind::Lorentzian,
            Prior::Voigt => PeakKind::Voigt,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    A,
    B,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic paired dataset and its manifest.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Pair two directories of spectrum files by sample name.
    Pair {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir_a: PathBuf,
        #[arg(long)]
        dir_b: PathBuf,
        #[arg(long)]
        modality_a: Modality,
        #[arg(long)]
        modality_b: Modality,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Deconstruct one spectrum file or one side of a manifest.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "modality")]
        input: Option<PathBuf>,
        #[arg(long)]
        modality: Option<Modality>,
        #[arg(long, value_enum, default_value = "a")]
        side: SideArg,
        #[arg(long, value_enum)]
        prior: Option<Prior>,
        /// Treat a non-converged fit as a numerical failure.
        #[arg(long)]
        strict: bool,
    },
    /// Train a generative model on a manifest's train split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        prior: Option<Prior>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Label stored in the latent traces; defaults to the prior name.
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Generate modality-B spectra with a trained checkpoint.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Every entry instead of only the test split.
        #[arg(long)]
        all: bool,
    },
    /// Compare generated spectra with their ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Ground-truth manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest written by `generate`.
        #[arg(long)]
        generated: PathBuf,
    },
    /// Compare the latent spaces of two runs.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Latent trace file, training output directory or checkpoint.
        run_a: PathBuf,
        run_b: PathBuf,
        /// Needed when a run is given as a checkpoint.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn with_fraction(mut cfg: RunConfig, f: Option<f64>) -> Result<RunConfig, Error> {
    if let Some(f) = f {
        cfg.test_fraction = f;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn record(out_dir: &Path, inputs: &[&Path]) -> Result<(), Error> {
    pipeline::record_inputs(out_dir, inputs)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Synth { common, test_fraction } => {
            let cfg = with_fraction(load_config(&common)?, test_fraction)?;
            pipeline::synth(&cfg, &common.out_dir)?;
        }
        Command::Pair { common, dir_a, dir_b, modality_a, modality_b, test_fraction } => {
            let cfg = with_fraction(load_config(&common)?, test_fraction)?;
            let abs = |p: &Path| std::fs::canonicalize(p).map_err(|e| Error::io(p, e));
            let m = build_manifest(&abs(&dir_a)?, &abs(&dir_b)?, modality_a, modality_b, cfg.test_fraction, cfg.seed)?;
            std::fs::create_dir_all(&common.out_dir).map_err(|e| Error::io(&common.out_dir, e))?;
            m.save(&common.out_dir.join(pipeline::MANIFEST_FILE))?;
            log::info!("paired {} samples", m.entries.len());
        }
        Command::Fit { common, manifest, input, modality, side, prior, strict } => {
            let cfg = load_config(&common)?;
            let prior = prior.map_or(cfg.prior, PeakKind::from);
            if let Some(path) = manifest {
                let m = PairManifest::load(&path)?;
                let side = match side {
                    SideArg::A => Side::A,
                    SideArg::B => Side::B,
                };
                pipeline::fit_manifest(&cfg, &m, side, prior, strict, &common.out_dir)?;
                record(&common.out_dir, &[&path])?;
            } else if let (Some(path), Some(modality)) = (input, modality) {
                let rec = read_rruff(&path, modality)?;
                let name = rec.name().map(str::to_string).unwrap_or_else(|| path.display().to_string());
                let fit = pipeline::fit_one(&cfg, &name, &rec.spectrum, prior, strict)?;
                pipeline::write_fits(&cfg, &[fit], &common.out_dir)?;
                record(&common.out_dir, &[&path])?;
            }
        }
        Command::Train { common, manifest, prior, epochs, run_id } => {
            let mut cfg = load_config(&common)?;
            if let Some(p) = prior {
                cfg.prior = p.into();
            }
            if let Some(e) = epochs {
                cfg.model.epochs = e;
                cfg.validate()?;
            }
            let m = PairManifest::load(&manifest)?;
            let run_id = run_id.unwrap_or_else(|| cfg.prior.to_string());
            let out = pipeline::train(&cfg, &m, cfg.prior, &run_id, &common.out_dir)?;
            if let Some(last) = out.history.last() {
                log::info!("epoch {}: total {:.6} recon {:.6} kl {:.4}", last.epoch, last.total, last.recon, last.kl);
            }
            record(&common.out_dir, &[&manifest])?;
        }
        Command::Generate { common, checkpoint: ckpt, manifest, all } => {
            let cfg = load_config(&common)?;
            let model = checkpoint::load(&ckpt)?;
            let m = PairManifest::load(&manifest)?;
            pipeline::generate(&cfg, &model, &m, all, &common.out_dir)?;
            record(&common.out_dir, &[&ckpt, &manifest])?;
        }
        Command::Evaluate { common, manifest, generated } => {
            let cfg = load_config(&common)?;
            let truth = PairManifest::load(&manifest)?;
            let gen = PairManifest::load(&generated)?;
            let report = pipeline::evaluate(&cfg, &gen, &truth, &common.out_dir)?;
            if let Some(c) = report.aggregates.correlation.mean {
                log::info!("{} pairs, mean correlation {c:.4}", report.n_pairs);
            }
            record(&common.out_dir, &[&manifest, &generated])?;
        }
        Command::Analyze { common, run_a, run_b, manifest } => {
            let cfg = load_config(&common)?;
            let m = manifest.as_deref().map(PairManifest::load).transpose()?;
            let a = pipeline::load_trace(&cfg, &run_a, m.as_ref())?;
            let b = pipeline::load_trace(&cfg, &run_b, m.as_ref())?;
            let analysis = pipeline::analyze(&cfg, &a, &b, &common.out_dir)?;
            log::info!(
                "centroid separation {:.4}, permutation p = {:.4}",
                analysis.centroid_separation,
                analysis.permutation.p_value
            );
            record(&common.out_dir, &[&run_a, &run_b])?;
        }
    }
    Ok(())
}

/// 2 for bad data or configuration, 3 for numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
