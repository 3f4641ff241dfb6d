//! Trains a width-8 model on synthetic 64×64 scenes and reports the loss
//! curve and held-out PSNR against the do-nothing baseline.
//!
//! `cargo run --release --example train_toy -- [--no-dfb] [--seed N] [--epochs N] [--lr0 X]`

use densesr::dataset::generate;
use densesr::network::ModelConfig;
use densesr::synth::SceneParams;
use densesr::train::{train, TrainConfig};

fn flag_value<T: std::str::FromStr>(args: &[String], name: &str) -> Option<T> {
    args.iter()
        .position(|a| a == name)
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok())
}

fn main() -> densesr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = flag_value(&args, "--seed").unwrap_or(1);
    let epochs: usize = flag_value(&args, "--epochs").unwrap_or(5);
    let lr0: f64 = flag_value(&args, "--lr0").unwrap_or(5e-4);
    let use_dfb = !args.iter().any(|a| a == "--no-dfb");

    let params = SceneParams::default();
    let train_set = generate(128, seed, &params)?;
    let val_set = generate(16, seed + 1_000, &params)?;
    let model = ModelConfig {
        use_dfb,
        fan_in_init: true,
        ..ModelConfig::with_width(8)
    };
    let cfg = TrainConfig {
        lr0,
        lr_min: lr0 / 4.0,
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let out = train(
        &model,
        &cfg,
        &train_set,
        &val_set,
        None,
        &mut std::io::sink(),
    )?;
    let baseline = val_set.iter().map(|s| s.baseline_psnr).sum::<f64>() / val_set.len() as f64;
    println!(
        "{} steps in {:.0} s (dfb: {use_dfb})",
        out.losses.len(),
        start.elapsed().as_secs_f64()
    );
    println!(
        "smoothed loss {:.4} -> {:.4} (ratio {:.3})",
        out.smoothed_initial,
        out.smoothed_final,
        out.smoothed_final / out.smoothed_initial
    );
    println!("baseline PSNR {baseline:.2} dB");
    for (epoch, p) in out.val_psnr.iter().enumerate() {
        println!("epoch {epoch}: validation PSNR {p:.2} dB");
    }
    Ok(())
}
