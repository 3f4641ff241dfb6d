//! Direct loop implementations used as oracles. They share no code with the
//! library beyond the tensor container.

#![allow(dead_code)]

use densesr::Tensor;

pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

pub fn hamming_1d(k: usize) -> Vec<f64> {
    (0..k)
        .map(|n| {
            if k == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (k as f64 - 1.0)).cos()
            }
        })
        .collect()
}

/// Per-pixel taps of a `G·K²×H×W` raw tensor after softmax and optional
/// Hamming reweighting: `out[g][p][t]`.
pub fn softmax_taps(
    raw: &Tensor<f64>,
    groups: usize,
    k: usize,
    hamming: bool,
) -> Vec<Vec<Vec<f64>>> {
    let (_, h, w) = raw.chw().unwrap();
    let hw = h * w;
    let kk = k * k;
    let win = hamming_1d(k);
    (0..groups)
        .map(|g| {
            (0..hw)
                .map(|p| {
                    let vals: Vec<f64> = (0..kk).map(|t| raw[(g * kk + t) * hw + p]).collect();
                    let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = vals.iter().map(|v| (v - mx).exp()).collect();
                    let s: f64 = e.iter().sum();
                    let mut soft: Vec<f64> = e.iter().map(|v| v / s).collect();
                    if hamming {
                        for (t, v) in soft.iter_mut().enumerate() {
                            *v *= win[t / k] * win[t % k];
                        }
                        let s: f64 = soft.iter().sum();
                        soft.iter_mut().for_each(|v| *v /= s);
                    }
                    soft
                })
                .collect()
        })
        .collect()
}

/// `out[c,y,x] = Σ_{dy,dx} taps[p][(dy+r)·k + dx+r] · x[c, reflect(y+dy), reflect(x+dx)]`.
pub fn filter(x: &Tensor<f64>, taps: &[Vec<f64>], k: usize) -> Tensor<f64> {
    let (c, h, w) = x.chw().unwrap();
    let r = (k / 2) as isize;
    let mut out = Tensor::zeros(&[c, h, w]);
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let p = y * w + xx;
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let t = ((dy + r) * k as isize + dx + r) as usize;
                        let sy = reflect(y as isize + dy, h);
                        let sx = reflect(xx as isize + dx, w);
                        acc += taps[p][t] * x[ci * h * w + sy * w + sx];
                    }
                }
                out[ci * h * w + p] = acc;
            }
        }
    }
    out
}

/// Identity minus low-pass, tap by tap.
pub fn highpass_taps(low: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let centre = (k / 2) * k + k / 2;
    low.iter()
        .map(|taps| {
            taps.iter()
                .enumerate()
                .map(|(t, &v)| if t == centre { 1.0 - v } else { -v })
                .collect()
        })
        .collect()
}

/// Stride-1 convolution with reflect padding `k/2` and a bias.
pub fn conv_same(x: &Tensor<f64>, weight: &Tensor<f64>, bias: &Tensor<f64>) -> Tensor<f64> {
    let (ci_n, h, w) = x.chw().unwrap();
    let dims = weight.dims();
    let (co_n, k) = (dims[0], dims[2]);
    let r = (k / 2) as isize;
    let mut out = Tensor::zeros(&[co_n, h, w]);
    for co in 0..co_n {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = bias[co];
                for ci in 0..ci_n {
                    for ky in 0..k {
                        for kx in 0..k {
                            let sy = reflect(y as isize + ky as isize - r, h);
                            let sx = reflect(xx as isize + kx as isize - r, w);
                            acc += weight[((co * ci_n + ci) * k + ky) * k + kx]
                                * x[ci * h * w + sy * w + sx];
                        }
                    }
                }
                out[co * h * w + y * w + xx] = acc;
            }
        }
    }
    out
}

/// Group `g` of the output fills sub-pixel `(g / 2, g % 2)` of each 2×2 cell.
pub fn shuffle(groups: &[Tensor<f64>]) -> Tensor<f64> {
    let (c, h, w) = groups[0].chw().unwrap();
    let mut out = Tensor::zeros(&[c, 2 * h, 2 * w]);
    for (g, t) in groups.iter().enumerate() {
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    out[ci * 4 * h * w + (2 * y + g / 2) * 2 * w + 2 * x + g % 2] =
                        t[ci * h * w + y * w + x];
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_tensor(dims: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(dims, |_| rng.gen_range(lo..hi))
}
