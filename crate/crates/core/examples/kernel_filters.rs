//! Builds per-pixel low-pass kernels from random logits, inverts them into
//! high-pass filters and splits a step edge into smooth and detail parts.
//!
//! `cargo run --release --example kernel_filters`

use densesr::kernel_ops::{
    apply_highpass, apply_kernel_field, hamming_window, invert_to_highpass, normalize_kernels,
};
use densesr::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> densesr::Result<()> {
    let (k, h, w) = (5, 6, 12);
    println!("hamming window K={k}: {:.4?}", hamming_window(k));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw = Tensor::from_fn(&[k * k, h, w], |_| rng.gen_range(-2.0f32..2.0));
    let low = normalize_kernels(&raw, k, true)?;
    let high = invert_to_highpass(&low)?;
    let taps = low.taps(2, 3);
    println!(
        "low-pass taps at (2,3) sum to {:.6}, min {:.4}",
        taps.iter().sum::<f32>(),
        taps.iter().cloned().fold(1.0, f32::min)
    );
    println!(
        "high-pass taps at (2,3) sum to {:.2e}",
        high.taps(2, 3).iter().sum::<f32>()
    );

    let edge = Tensor::from_fn(&[1, h, w], |i| if i % w < w / 2 { 0.2f32 } else { 0.8 });
    let smooth = apply_kernel_field(&edge, &low)?;
    let detail = apply_highpass(&edge, &high)?;
    println!("row 2   input  {:.2?}", &edge.data()[2 * w..3 * w]);
    println!("row 2   smooth {:.2?}", &smooth.data()[2 * w..3 * w]);
    println!("row 2   detail {:+.2?}", &detail.data()[2 * w..3 * w]);
    Ok(())
}
