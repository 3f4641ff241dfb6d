//! Prior-modulated window attention on a synthetic scene: how semantic and
//! geometric similarity reshape the attention weights of one window.
//!
//! `cargo run --release --example window_attention`

use densesr::attention::{modulated_window_attention, Modulation, SimConfig, WindowLayout};
use densesr::network::resample_priors;
use densesr::synth::{gen_scene, SceneParams};
use densesr::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> densesr::Result<()> {
    let scene = gen_scene(3, &SceneParams::default())?;
    let stack = resample_priors(&scene.priors, 60.0, 3)?;
    let stage = &stack.stages[0];
    let (h, w) = stage.hw();
    let layout = WindowLayout::fitted(h, w, 8, 4)?;
    let n = layout.tokens_per_window();
    let maps = stage
        .modulation::<f64>(&layout, &SimConfig::default())?
        .expect("SIM enabled");
    println!(
        "{h}×{w} priors, {} windows of {n} tokens",
        layout.num_windows()
    );

    // The window whose prior map varies the most.
    let spread = |m: &Vec<f64>| m.iter().cloned().fold(1.0, f64::min);
    let wi = (0..maps.len())
        .min_by(|&a, &b| spread(&maps[a]).total_cmp(&spread(&maps[b])))
        .unwrap();
    println!("window {wi}: prior map range [{:.3}, 1]", spread(&maps[wi]));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut qkv = || Tensor::from_fn(&[n, 2, 8], |_| rng.gen_range(-1.0..1.0));
    let (q, k, v) = (qkv(), qkv(), qkv());
    let (_, plain) = modulated_window_attention(&q, &k, &v, None, None, Modulation::Multiply)?;
    for mode in [Modulation::Multiply, Modulation::LogBias] {
        let (_, probs) = modulated_window_attention(&q, &k, &v, Some(&maps[wi]), None, mode)?;
        let shift: f64 = probs
            .data()
            .iter()
            .zip(plain.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / (2 * n) as f64;
        let row: f64 = probs.data()[..n].iter().sum();
        println!(
            "{mode:?}: mean total-variation shift per row {shift:.4}, first row sums to {row:.6}"
        );
    }
    Ok(())
}
