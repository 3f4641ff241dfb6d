//! Image quality metrics on `C×H×W` tensors with values in `[0, 1]`.

use crate::error::{config_err, Result};
use crate::tensor::Tensor;

pub fn mse(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<f64> {
    pred.expect_same_dims(target)?;
    let n = pred.len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum::<f64>()
        / n)
}

/// `10·log10(max² / MSE)` in dB; `+∞` when the images are identical.
pub fn psnr(pred: &Tensor<f32>, target: &Tensor<f32>, max_val: f64) -> Result<f64> {
    let m = mse(pred, target)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / m).log10())
}

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_taps(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut k: Vec<f64> = (0..n)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-region separable filtering of an `h×w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ho, wo) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * wo];
    for y in 0..h {
        for xo in 0..wo {
            tmp[y * wo + xo] = (0..n).map(|t| k[t] * x[y * w + xo + t]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for yo in 0..ho {
        for xo in 0..wo {
            out[yo * wo + xo] = (0..n).map(|t| k[t] * tmp[(yo + t) * wo + xo]).sum();
        }
    }
    (out, ho, wo)
}

/// Structural similarity with an 11×11 Gaussian window (σ = 1.5), averaged
/// over the valid region of every channel. Images smaller than the window
/// use a window as large as the smaller side.
pub fn ssim(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<f64> {
    pred.expect_same_dims(target)?;
    let (c, h, w) = pred.chw()?;
    if h == 0 || w == 0 {
        return Err(config_err!("ssim of an empty image"));
    }
    let n = SSIM_WINDOW.min(h).min(w);
    let k = gaussian_taps(n, SSIM_SIGMA);
    let hw = h * w;
    let mut total = 0.0;
    for ci in 0..c {
        let a: Vec<f64> = pred.data()[ci * hw..(ci + 1) * hw]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let b: Vec<f64> = target.data()[ci * hw..(ci + 1) * hw]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let prod =
            |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let (mu_a, ho, wo) = filter_valid(&a, h, w, &k);
        let (mu_b, _, _) = filter_valid(&b, h, w, &k);
        let (e_aa, _, _) = filter_valid(&prod(&a, &a), h, w, &k);
        let (e_bb, _, _) = filter_valid(&prod(&b, &b), h, w, &k);
        let (e_ab, _, _) = filter_valid(&prod(&a, &b), h, w, &k);
        let mut sum = 0.0;
        for i in 0..ho * wo {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
        total += sum / (ho * wo) as f64;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let a = Tensor::full(&[3, 4, 4], 0.5f32);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-5);
        let free = Tensor::full(&[3, 4, 4], 0.8f32);
        let shadowed = free.map(|v| v * 0.5);
        assert!((psnr(&shadowed, &free, 1.0).unwrap() - 7.9588).abs() < 1e-3);
    }

    #[test]
    fn ssim_cases() {
        let img = Tensor::from_fn(&[1, 16, 16], |i| ((i * 13) % 17) as f32 / 17.0);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
        let neg = img.map(|v| 1.0 - v);
        assert!(ssim(&img, &neg).unwrap() < 1.0);
        let (m1, m2) = (0.4f64, 0.5f64);
        let a = Tensor::full(&[1, 16, 16], m1 as f32);
        let b = Tensor::full(&[1, 16, 16], m2 as f32);
        let (m1, m2) = (m1 as f32 as f64, m2 as f32 as f64);
        let expect = (2.0 * m1 * m2 + SSIM_C1) / (m1 * m1 + m2 * m2 + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-9);
    }
}
