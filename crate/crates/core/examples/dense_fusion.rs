//! Fuses a fine and a coarse feature map with the dense fusion block and
//! with the plain upsample-and-concatenate baseline.
//!
//! `cargo run --release --example dense_fusion`

use densesr::autograd::Graph;
use densesr::dfb::{DenseFusion, DfbConfig, PlainFusion};
use densesr::param::{ParamBuilder, ParamStore};
use densesr::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> densesr::Result<()> {
    let cfg = DfbConfig {
        compressed_channels: 8,
        ..DfbConfig::default()
    };
    let mut store = ParamStore::<f32>::new();
    let mut b = ParamBuilder::new(&mut store, 0, 0.2);
    let dense = DenseFusion::new(&mut b, 8, 16, 8, &cfg)?;
    let plain = PlainFusion::new(&mut b, 8, 16, 8)?;
    println!(
        "{} parameter tensors, {} values",
        store.len(),
        store.iter().map(|(_, _, p)| p.value.len()).sum::<usize>()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hr = Tensor::from_fn(&[8, 32, 32], |_| rng.gen_range(-1.0f32..1.0));
    let lr = Tensor::from_fn(&[16, 16, 16], |_| rng.gen_range(-1.0f32..1.0));
    let mut g = Graph::with_params(&store);
    let (h, l) = (g.constant(hr), g.constant(lr));
    let (smooth, detail) = dense.streams(&mut g, h, l)?;
    let fused = dense.forward(&mut g, h, l)?;
    let baseline = plain.forward(&mut g, h, l)?;
    let rms =
        |t: &Tensor<f32>| (t.data().iter().map(|v| v * v).sum::<f32>() / t.len() as f32).sqrt();
    println!(
        "smooth stream {:?} rms {:.3}",
        g.value(smooth).dims(),
        rms(g.value(smooth))
    );
    println!(
        "detail stream {:?} rms {:.3}",
        g.value(detail).dims(),
        rms(g.value(detail))
    );
    println!(
        "dense fusion  {:?} rms {:.3}",
        g.value(fused).dims(),
        rms(g.value(fused))
    );
    println!(
        "plain fusion  {:?} rms {:.3}",
        g.value(baseline).dims(),
        rms(g.value(baseline))
    );
    Ok(())
}
