//! Back-projects a synthetic depth map and estimates surface normals.
//!
//! `cargo run --release --example geometry_normals`

use densesr::geometry::{backproject, intrinsics_from_fov, normals_from_points};
use densesr::Tensor;

fn main() -> densesr::Result<()> {
    let (h, w) = (48, 64);
    let k = intrinsics_from_fov(60.0, w, h)?;
    println!(
        "focal length {:.4} px, principal point ({}, {})",
        k.f, k.cx, k.cy
    );

    // A floor receding from the camera with a box standing on it.
    let depth = Tensor::from_fn(&[1, h, w], |i| {
        let (x, y) = (i % w, i / w);
        if (20..40).contains(&x) && (10..30).contains(&y) {
            2.0f32
        } else {
            2.0 + 3.0 * (1.0 - y as f32 / h as f32)
        }
    });
    let normals = normals_from_points(&backproject(&depth, &k)?)?;
    let valid = normals.valid.iter().filter(|&&v| v).count();
    println!("{valid}/{} pixels with a usable normal", h * w);
    for (label, x, y) in [("box face", 30, 20), ("floor", 5, 40)] {
        let p = (y * w + x) * 3;
        println!(
            "{label:<8} normal {:+.3?}",
            &normals.normals.data()[p..p + 3]
        );
    }
    Ok(())
}
