//! 8-bit PNG import and export for `C×H×W` tensors in `[0, 1]`.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{config_err, Error, Result};
use crate::tensor::Tensor;

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Writes a `3×H×W` tensor as an RGB PNG (values clamped to `[0, 1]`).
pub fn save_rgb(path: &Path, t: &Tensor<f32>) -> Result<()> {
    let (c, h, w) = t.chw()?;
    if c != 3 {
        return Err(config_err!("RGB export needs 3 channels, got {c}"));
    }
    let hw = h * w;
    let img: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let p = y as usize * w + x as usize;
        Rgb([quantize(t[p]), quantize(t[hw + p]), quantize(t[2 * hw + p])])
    });
    img.save(path).map_err(|e| image_err(path, e))
}

/// Writes a `1×H×W` (or `H×W`) tensor as a grayscale PNG.
pub fn save_gray(path: &Path, t: &Tensor<f32>) -> Result<()> {
    let (h, w) = match *t.dims() {
        [1, h, w] | [h, w] => (h, w),
        _ => {
            return Err(config_err!(
                "grayscale export needs 1×H×W, got {:?}",
                t.dims()
            ))
        }
    };
    let img: GrayImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([quantize(t[y as usize * w + x as usize])])
    });
    img.save(path).map_err(|e| image_err(path, e))
}

/// Reads any PNG as a `3×H×W` tensor in `[0, 1]`.
pub fn load_rgb(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let hw = h * w;
    let raw = img.as_raw();
    Ok(Tensor::from_fn(&[3, h, w], |i| {
        raw[(i % hw) * 3 + i / hw] as f32 / 255.0
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_on_the_8_bit_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let t = Tensor::from_fn(&[3, 5, 7], |i| ((i * 31) % 256) as f32 / 255.0);
        save_rgb(&path, &t).unwrap();
        assert_eq!(load_rgb(&path).unwrap().max_abs_diff(&t), 0.0);
        assert!(matches!(
            load_rgb(&dir.path().join("missing.png")),
            Err(Error::Image { .. })
        ));
    }
}
