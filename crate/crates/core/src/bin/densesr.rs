//! Command-line front end: data generation, training, inference,
//! evaluation, feature-spectrum analysis and gradient checks.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densesr::attention::Modulation;
use densesr::checkpoint;
use densesr::config::KeyValues;
use densesr::dataset::{export_dataset, read_priors, Manifest};
use densesr::error::Error;
use densesr::experiment::{decoder_stage, feature_spectrum};
use densesr::gradsuite::{run_suite, SUITES};
use densesr::image_io::{load_rgb, save_gray, save_rgb};
use densesr::network::{clamp_unit, ScenePriors};
use densesr::synth::SceneParams;
use densesr::train::{evaluate, parse_run_config, train};
use densesr::Result;

#[derive(Parser)]
#[command(
    name = "densesr",
    version,
    about = "Shadow removal with depth, normal and semantic priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenes and a manifest.
    GenData {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Side length of the square scenes.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write 8-bit PNG previews of each image pair.
        #[arg(long)]
        png: bool,
    },
    /// Train on a generated dataset; the last `val_count` samples are held out.
    Train(TrainArgs),
    /// Remove shadows from one PNG image.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Directory with depth.dst, normals.dst and semantic.dst; neutral priors when absent.
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a dataset and write a tab-separated report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Save the log-magnitude spectrum of a decoder feature and print its high-frequency ratio.
    AnalyzeFft {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Decoder stage 0 (deepest) to 2 (final).
        #[arg(long, default_value_t = 2)]
        stage: usize,
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a finite-difference gradient suite ("all" runs every suite).
    GradCheck {
        #[arg(long)]
        module: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// key=value file with model and training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Replace the dense fusion block with upsample-and-add.
    #[arg(long)]
    no_dfb: bool,
    /// Use standard attention blocks everywhere.
    #[arg(long)]
    no_sim: bool,
    /// RGB input only; also drops the geometric attention map.
    #[arg(long, group = "prior_ablation")]
    no_depth: bool,
    /// Drop the geometric attention map.
    #[arg(long, group = "prior_ablation")]
    no_normal: bool,
    /// Drop the semantic attention map and bottleneck injection.
    #[arg(long, group = "prior_ablation")]
    no_sem: bool,
    /// Taper predicted filter kernels with a Hamming window.
    #[arg(long)]
    hamming: bool,
    #[arg(long)]
    modulation: Option<Modulation>,
}

fn load_priors(dir: Option<&PathBuf>, h: usize, w: usize, d_sem: usize) -> Result<ScenePriors> {
    match dir {
        Some(d) => read_priors(d),
        None => Ok(ScenePriors::neutral(h, w, d_sem)),
    }
}

fn run_train(a: TrainArgs) -> Result<()> {
    let mut kv = match &a.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::parse("", "defaults")?,
    };
    let (mut model, cfg) = parse_run_config(&mut kv)?;
    model.use_dfb &= !a.no_dfb;
    model.use_sim &= !a.no_sim;
    model.dfb.hamming |= a.hamming;
    if let Some(m) = a.modulation {
        model.sim.mode = m;
    }
    if a.no_depth {
        model.use_depth_input = false;
        model.sim.use_geometry = false;
    }
    if a.no_normal {
        model.sim.use_geometry = false;
    }
    if a.no_sem {
        model.sim.use_semantic = false;
        model.use_semantic_injection = false;
    }
    let manifest = Manifest::read(&a.data)?;
    let samples = manifest.load_all()?;
    if cfg.val_count >= samples.len() {
        return Err(Error::Config(format!(
            "val_count {} leaves no training samples out of {}",
            cfg.val_count,
            samples.len()
        )));
    }
    let (train_set, val_set) = samples.split_at(samples.len() - cfg.val_count);
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let log_path = a.out.join("train_log.tsv");
    let mut log = fs::File::create(&log_path).map_err(|e| Error::Io {
        path: log_path.clone(),
        source: e,
    })?;
    let out = train(&model, &cfg, train_set, val_set, Some(&a.out), &mut log)?;
    println!("steps: {}", out.losses.len());
    println!(
        "smoothed loss: {:.5} -> {:.5}",
        out.smoothed_initial, out.smoothed_final
    );
    if let Some(p) = out.val_psnr.last() {
        println!("final validation PSNR: {p:.3} dB");
    }
    println!("checkpoint: {}", a.out.join("checkpoint").display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            n,
            seed,
            size,
            out,
            png,
        } => {
            let params = SceneParams {
                height: size,
                width: size,
                ..SceneParams::default()
            };
            let m = export_dataset(n, seed, &params, &out, png)?;
            println!("wrote {} scenes to {}", m.len(), out.display());
        }
        Command::Train(a) => run_train(a)?,
        Command::Infer {
            ckpt,
            input,
            priors,
            out,
        } => {
            let (model, store) = checkpoint::load(&ckpt)?;
            let image = load_rgb(&input)?;
            let (_, h, w) = image.chw()?;
            let priors = load_priors(priors.as_ref(), h, w, model.cfg.d_sem)?;
            let pred = clamp_unit(&model.predict(&store, &image, &priors, None)?);
            save_rgb(&out, &pred)?;
            println!("wrote {}", out.display());
        }
        Command::Eval { ckpt, data, report } => {
            let (model, store) = checkpoint::load(&ckpt)?;
            let samples = Manifest::read(&data)?.load_all()?;
            let r = evaluate(&model, &store, &samples)?;
            fs::write(&report, r.to_tsv()).map_err(|e| Error::Io {
                path: report.clone(),
                source: e,
            })?;
            println!(
                "mean PSNR {:.3} dB (do-nothing {:.3} dB), mean SSIM {:.4}",
                r.mean_psnr, r.mean_baseline_psnr, r.mean_ssim
            );
        }
        Command::AnalyzeFft {
            ckpt,
            input,
            stage,
            priors,
            out,
        } => {
            let (model, store) = checkpoint::load(&ckpt)?;
            let image = load_rgb(&input)?;
            let (_, h, w) = image.chw()?;
            let priors = load_priors(priors.as_ref(), h, w, model.cfg.d_sem)?;
            let name = decoder_stage(stage)?;
            let (ratio, spectrum) = feature_spectrum(&model, &store, &image, &priors, &name)?;
            save_gray(&out, &spectrum)?;
            println!("{name} high-frequency ratio {ratio:.6}");
        }
        Command::GradCheck { module, seed } => {
            let names: Vec<&str> = if module == "all" {
                SUITES.to_vec()
            } else {
                vec![module.as_str()]
            };
            for name in names {
                let r = run_suite(name, seed)?;
                println!(
                    "{name}: max relative error {:.3e} over {} coordinates",
                    r.max_rel_error, r.coords_checked
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
