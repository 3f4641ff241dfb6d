//! Frequency-domain analysis of images and feature maps.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{config_err, Result};
use crate::tensor::Tensor;

/// Unnormalized 2D DFT of an `h×w` plane, row-major, DC at index 0.
pub fn fft2(plane: &[f64], h: usize, w: usize) -> Vec<Complex<f64>> {
    let mut planner = FftPlanner::new();
    let mut data: Vec<Complex<f64>> = plane.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let row = planner.plan_fft_forward(w);
    for r in data.chunks_mut(w) {
        row.process(r);
    }
    let col = planner.plan_fft_forward(h);
    let mut buf = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            buf[y] = data[y * w + x];
        }
        col.process(&mut buf);
        for y in 0..h {
            data[y * w + x] = buf[y];
        }
    }
    data
}

/// `|F|²` per frequency, DC at index 0.
pub fn power_spectrum(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    fft2(plane, h, w).iter().map(|c| c.norm_sqr()).collect()
}

fn planes(map: &Tensor<f32>) -> Result<(usize, usize, usize)> {
    match *map.dims() {
        [c, h, w] if c > 0 && h > 0 && w > 0 => Ok((c, h, w)),
        [h, w] if h > 0 && w > 0 => Ok((1, h, w)),
        _ => Err(config_err!(
            "spectrum needs a non-empty H×W or C×H×W map, got {:?}",
            map.dims()
        )),
    }
}

/// Channel-averaged power spectrum of the mean-removed planes, DC at index 0.
fn mean_power(map: &Tensor<f32>) -> Result<(Vec<f64>, usize, usize)> {
    let (c, h, w) = planes(map)?;
    let hw = h * w;
    let mut acc = vec![0.0; hw];
    for ci in 0..c {
        let plane: Vec<f64> = map.data()[ci * hw..(ci + 1) * hw]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let mean = plane.iter().sum::<f64>() / hw as f64;
        let centred: Vec<f64> = plane.iter().map(|v| v - mean).collect();
        for (a, p) in acc.iter_mut().zip(power_spectrum(&centred, h, w)) {
            *a += p / c as f64;
        }
    }
    Ok((acc, h, w))
}

/// Signed frequency of DFT bin `i` out of `n`.
fn signed_freq(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Radius of bin `(y, x)` with each axis scaled so its Nyquist frequency is 1.
fn normalized_radius(y: usize, x: usize, h: usize, w: usize) -> f64 {
    let fy = if h > 1 {
        signed_freq(y, h) / (h as f64 / 2.0)
    } else {
        0.0
    };
    let fx = if w > 1 {
        signed_freq(x, w) / (w as f64 / 2.0)
    } else {
        0.0
    };
    (fy * fy + fx * fx).sqrt()
}

/// Share of spectral energy at normalized radius above `r0_fraction`.
///
/// Each channel's mean is removed first, so the ratio ignores constant
/// offsets and a constant map scores 0. Channels contribute their power
/// spectra equally.
pub fn fft_hf_ratio(map: &Tensor<f32>, r0_fraction: f64) -> Result<f64> {
    let (power, h, w) = mean_power(map)?;
    let total: f64 = power.iter().sum();
    // Rounding residue of mean removal on a constant map counts as zero.
    let scale: f64 = map.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() * (h * w) as f64;
    if total <= 1e-24 * scale {
        return Ok(0.0);
    }
    let mut high = 0.0;
    for y in 0..h {
        for x in 0..w {
            if normalized_radius(y, x, h, w) > r0_fraction {
                high += power[y * w + x];
            }
        }
    }
    Ok(high / total)
}

/// `log(1 + |F|)` of the mean-removed map with DC at the centre, scaled to
/// `[0, 1]`, as a `1×H×W` image.
pub fn log_spectrum_image(map: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (power, h, w) = mean_power(map)?;
    let logs: Vec<f64> = power.iter().map(|p| p.sqrt().ln_1p()).collect();
    let max = logs.iter().cloned().fold(0.0, f64::max);
    let norm = if max > 0.0 { max } else { 1.0 };
    Ok(Tensor::from_fn(&[1, h, w], |i| {
        let (y, x) = (i / w, i % w);
        let (sy, sx) = ((y + h - h / 2) % h, (x + w - w / 2) % w);
        (logs[sy * w + sx] / norm) as f32
    }))
}
