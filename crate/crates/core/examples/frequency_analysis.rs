//! High-frequency energy of the final decoder features for an untrained
//! model with and without the dense fusion block, plus the spectrum image.
//!
//! `cargo run --release --example frequency_analysis -- [spectrum.png]`

use densesr::experiment::{feature_spectrum, HF_RADIUS};
use densesr::image_io::save_gray;
use densesr::network::{DenseSr, ModelConfig};
use densesr::synth::{gen_scene, SceneParams};

fn main() -> densesr::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "spectrum.png".into());
    let scene = gen_scene(5, &SceneParams::default())?;
    for use_dfb in [true, false] {
        let cfg = ModelConfig {
            use_dfb,
            fan_in_init: true,
            ..ModelConfig::with_width(8)
        };
        let (model, store) = DenseSr::init(&cfg)?;
        let (ratio, image) =
            feature_spectrum(&model, &store, &scene.shadowed, &scene.priors, "dec2")?;
        println!("dfb {use_dfb:<5}: energy above {HF_RADIUS} of Nyquist {ratio:.4}");
        if use_dfb {
            save_gray(out.as_ref(), &image)?;
        }
    }
    println!("spectrum written to {out}");
    Ok(())
}
