//! Spatially-variant filtering shared by the smoothing, recuperation and
//! reassembly paths.
//!
//! A kernel field stores `K²` filter taps per pixel in channel-major layout
//! (`K²×H×W`), matching what a predictor convolution emits. Tap `t` sits at
//! offset `(t / K - K/2, t % K - K/2)`. Taps are shared by every feature
//! channel at a location, and borders are reflect-padded.

use crate::autograd::{Graph, Var};
use crate::error::{config_err, Error, Result};
use crate::ops::{self, reflect_index, Padding};
use crate::param::{ParamBuilder, ParamId};
use crate::tensor::{Scalar, Tensor};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum KernelKind {
    LowPass,
    HighPass,
}

/// Per-pixel `K×K` filters.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelField<T: Scalar = f32> {
    pub k: usize,
    pub kind: KernelKind,
    /// `K²×H×W` taps.
    pub weights: Tensor<T>,
}

impl<T: Scalar> KernelField<T> {
    pub fn height(&self) -> usize {
        self.weights.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.weights.dims()[2]
    }

    /// Taps at pixel `(i, j)`.
    pub fn taps(&self, i: usize, j: usize) -> Vec<T> {
        let (h, w) = (self.height(), self.width());
        (0..self.k * self.k)
            .map(|t| self.weights[t * h * w + i * w + j])
            .collect()
    }
}

fn check_odd(k: usize) -> Result<()> {
    if k % 2 == 0 {
        return Err(config_err!("kernel extent must be odd, got {k}"));
    }
    Ok(())
}

/// 1D Hamming window `0.54 - 0.46 cos(2πn/(K-1))`; `K = 1` yields `[1]`.
pub fn hamming_window(k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![1.0; k];
    }
    (0..k)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (k - 1) as f64).cos())
        .collect()
}

/// Outer product of [`hamming_window`] with itself, row-major `K×K`.
pub fn hamming_window_2d(k: usize) -> Vec<f64> {
    let h = hamming_window(k);
    h.iter()
        .flat_map(|a| h.iter().map(move |b| a * b))
        .collect()
}

/// Softmax over each group of `K²` channels, optionally followed by Hamming
/// windowing and renormalization. Operates in place on `G·K²×H×W` data.
fn softmax_groups<T: Scalar>(
    data: &mut [T],
    groups: usize,
    k: usize,
    hw: usize,
    window: Option<&[T]>,
) {
    let kk = k * k;
    let mut buf = vec![T::zero(); kk];
    for gi in 0..groups {
        let base = gi * kk * hw;
        for p in 0..hw {
            let mut mx = T::neg_infinity();
            for t in 0..kk {
                buf[t] = data[base + t * hw + p];
                mx = mx.max(buf[t]);
            }
            let mut s = T::zero();
            for v in buf.iter_mut() {
                *v = (*v - mx).exp();
                s += *v;
            }
            for v in buf.iter_mut() {
                *v /= s;
            }
            if let Some(win) = window {
                let mut s = T::zero();
                for (v, &hv) in buf.iter_mut().zip(win) {
                    *v *= hv;
                    s += *v;
                }
                for v in buf.iter_mut() {
                    *v /= s;
                }
            }
            for t in 0..kk {
                data[base + t * hw + p] = buf[t];
            }
        }
    }
}

fn check_raw<T: Scalar>(raw: &Tensor<T>, groups: usize, k: usize) -> Result<(usize, usize)> {
    check_odd(k)?;
    let (c, h, w) = raw.chw()?;
    if c != groups * k * k {
        return Err(config_err!(
            "raw kernel tensor needs {} channels for {groups} group(s) of {k}×{k}, got {c}",
            groups * k * k
        ));
    }
    Ok((h, w))
}

fn window_for<T: Scalar>(k: usize, hamming: bool) -> Option<Vec<T>> {
    hamming.then(|| hamming_window_2d(k).into_iter().map(T::cst).collect())
}

/// Turns `K²×H×W` raw predictions into a low-pass field whose taps are
/// non-negative and sum to one at every pixel.
pub fn normalize_kernels<T: Scalar>(
    raw: &Tensor<T>,
    k: usize,
    hamming: bool,
) -> Result<KernelField<T>> {
    let (h, w) = check_raw(raw, 1, k)?;
    let mut weights = raw.clone();
    softmax_groups(
        weights.data_mut(),
        1,
        k,
        h * w,
        window_for::<T>(k, hamming).as_deref(),
    );
    Ok(KernelField {
        k,
        kind: KernelKind::LowPass,
        weights,
    })
}

/// Differentiable grouped normalization of `G·K²×H×W` raw predictions.
pub fn normalize_kernels_var<T: Scalar>(
    g: &mut Graph<'_, T>,
    raw: Var,
    groups: usize,
    k: usize,
    hamming: bool,
) -> Result<Var> {
    let (h, w) = check_raw(g.value(raw), groups, k)?;
    let hw = h * w;
    let mut out = g.value(raw).clone();
    softmax_groups(
        out.data_mut(),
        groups,
        k,
        hw,
        window_for::<T>(k, hamming).as_deref(),
    );
    let kk = k * k;
    // With the window applied the result is softmax(v + ln h), so both
    // cases share the softmax Jacobian evaluated at the output.
    Ok(g.record(out, &[raw], move |ctx| {
        let q = ctx.out.data();
        let gr = ctx.grad.data();
        let mut d = vec![T::zero(); q.len()];
        for gi in 0..groups {
            let base = gi * kk * hw;
            for p in 0..hw {
                let dot: T = (0..kk)
                    .map(|t| q[base + t * hw + p] * gr[base + t * hw + p])
                    .sum();
                for t in 0..kk {
                    let i = base + t * hw + p;
                    d[i] = q[i] * (gr[i] - dot);
                }
            }
        }
        vec![Some(Tensor::new(ctx.inputs[0].dims(), d).unwrap())]
    }))
}

/// `E - W`: identity (centre tap) minus a low-pass field.
pub fn invert_to_highpass<T: Scalar>(lowpass: &KernelField<T>) -> Result<KernelField<T>> {
    if lowpass.kind != KernelKind::LowPass {
        return Err(Error::Contract(
            "high-pass inversion needs a low-pass kernel field".into(),
        ));
    }
    check_odd(lowpass.k)?;
    let mut weights = lowpass.weights.map(|v| -v);
    let hw = lowpass.height() * lowpass.width();
    let centre = lowpass.k * lowpass.k / 2;
    for v in &mut weights.data_mut()[centre * hw..(centre + 1) * hw] {
        *v += T::one();
    }
    Ok(KernelField {
        k: lowpass.k,
        kind: KernelKind::HighPass,
        weights,
    })
}

pub fn invert_to_highpass_var<T: Scalar>(
    g: &mut Graph<'_, T>,
    lowpass: Var,
    k: usize,
) -> Result<Var> {
    check_odd(k)?;
    let (c, h, w) = g.value(lowpass).chw()?;
    if c != k * k {
        return Err(config_err!("expected {} kernel taps, got {c}", k * k));
    }
    let hw = h * w;
    let centre = k * k / 2;
    let mut out = g.value(lowpass).map(|v| -v);
    for v in &mut out.data_mut()[centre * hw..(centre + 1) * hw] {
        *v += T::one();
    }
    Ok(g.record(out, &[lowpass], |ctx| vec![Some(ctx.grad.map(|v| -v))]))
}

/// Reflect-padded source pixel for tap `t` at every pixel: `K²·H·W` entries.
fn tap_sources(h: usize, w: usize, k: usize) -> Vec<u32> {
    let r = (k / 2) as isize;
    let mut src = Vec::with_capacity(k * k * h * w);
    for t in 0..k * k {
        let (dy, dx) = ((t / k) as isize - r, (t % k) as isize - r);
        for i in 0..h {
            let y = reflect_index(i as isize + dy, h);
            for j in 0..w {
                src.push((y * w + reflect_index(j as isize + dx, w)) as u32);
            }
        }
    }
    src
}

fn apply_taps<T: Scalar>(
    x: &[T],
    c: usize,
    kernels: &[T],
    src: &[u32],
    kk: usize,
    hw: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); c * hw];
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        let o = &mut out[ci * hw..(ci + 1) * hw];
        for t in 0..kk {
            let wt = &kernels[t * hw..(t + 1) * hw];
            let st = &src[t * hw..(t + 1) * hw];
            for p in 0..hw {
                o[p] += wt[p] * plane[st[p] as usize];
            }
        }
    }
    out
}

fn check_field_dims<T: Scalar>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    k: usize,
) -> Result<(usize, usize, usize)> {
    check_odd(k)?;
    let (c, h, w) = x.chw()?;
    let (kc, kh, kw) = kernels.chw()?;
    if kc != k * k || (kh, kw) != (h, w) {
        return Err(config_err!(
            "kernel field {:?} does not fit {k}×{k} taps over {h}×{w}",
            kernels.dims()
        ));
    }
    Ok((c, h, w))
}

/// `out[c,i,j] = Σ_t W[t,i,j] · x[c, i+dy_t, j+dx_t]` for any kernel field.
pub fn apply_kernel_field<T: Scalar>(x: &Tensor<T>, field: &KernelField<T>) -> Result<Tensor<T>> {
    let (c, h, w) = check_field_dims(x, &field.weights, field.k)?;
    let src = tap_sources(h, w, field.k);
    Tensor::new(
        &[c, h, w],
        apply_taps(
            x.data(),
            c,
            field.weights.data(),
            &src,
            field.k * field.k,
            h * w,
        ),
    )
}

/// Differentiable spatially-variant filtering with a `K²×H×W` kernel value.
pub fn apply_kernels_var<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    kernels: Var,
    k: usize,
) -> Result<Var> {
    let (c, h, w) = check_field_dims(g.value(x), g.value(kernels), k)?;
    let (hw, kk) = (h * w, k * k);
    let src = tap_sources(h, w, k);
    let out = Tensor::new(
        &[c, h, w],
        apply_taps(g.value(x).data(), c, g.value(kernels).data(), &src, kk, hw),
    )?;
    Ok(g.record(out, &[x, kernels], move |ctx| {
        let (xv, kv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
        let gr = ctx.grad.data();
        let dx = ctx.needs[0].then(|| {
            let mut dx = vec![T::zero(); c * hw];
            for ci in 0..c {
                let gp = &gr[ci * hw..(ci + 1) * hw];
                let dp = &mut dx[ci * hw..(ci + 1) * hw];
                for t in 0..kk {
                    let wt = &kv[t * hw..(t + 1) * hw];
                    let st = &src[t * hw..(t + 1) * hw];
                    for p in 0..hw {
                        dp[st[p] as usize] += wt[p] * gp[p];
                    }
                }
            }
            Tensor::new(&[c, h, w], dx).unwrap()
        });
        let dk = ctx.needs[1].then(|| {
            let mut dk = vec![T::zero(); kk * hw];
            for ci in 0..c {
                let gp = &gr[ci * hw..(ci + 1) * hw];
                let xp = &xv[ci * hw..(ci + 1) * hw];
                for t in 0..kk {
                    let st = &src[t * hw..(t + 1) * hw];
                    let dt = &mut dk[t * hw..(t + 1) * hw];
                    for p in 0..hw {
                        dt[p] += gp[p] * xp[st[p] as usize];
                    }
                }
            }
            Tensor::new(&[kk, h, w], dk).unwrap()
        });
        vec![dx, dk]
    }))
}

/// Applies one low-pass field per sub-pixel group to the same input.
pub fn apply_lowpass_grouped<T: Scalar>(
    lr: &Tensor<T>,
    kernels: &[KernelField<T>],
) -> Result<Vec<Tensor<T>>> {
    if kernels.len() != 4 {
        return Err(config_err!(
            "expected 4 sub-pixel kernel groups, got {}",
            kernels.len()
        ));
    }
    kernels
        .iter()
        .map(|field| {
            if field.kind != KernelKind::LowPass {
                return Err(Error::Contract(
                    "grouped smoothing needs low-pass kernel fields".into(),
                ));
            }
            apply_kernel_field(lr, field)
        })
        .collect()
}

pub fn apply_highpass<T: Scalar>(x: &Tensor<T>, field: &KernelField<T>) -> Result<Tensor<T>> {
    if field.kind != KernelKind::HighPass {
        return Err(Error::Contract(
            "high-frequency extraction needs a high-pass kernel field".into(),
        ));
    }
    apply_kernel_field(x, field)
}

fn check_groups<T: Scalar>(groups: &[&Tensor<T>]) -> Result<(usize, usize, usize)> {
    if groups.len() != 4 {
        return Err(config_err!(
            "pixel shuffle needs exactly 4 groups, got {}",
            groups.len()
        ));
    }
    let dims = groups[0].chw()?;
    if groups.iter().any(|t| t.dims() != groups[0].dims()) {
        return Err(config_err!("pixel shuffle groups must share dims"));
    }
    Ok(dims)
}

fn shuffle_into<T: Scalar>(groups: &[&[T]], c: usize, h: usize, w: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c * 4 * h * w];
    let w2 = 2 * w;
    for (gi, gdata) in groups.iter().enumerate() {
        let (a, b) = (gi / 2, gi % 2);
        for ci in 0..c {
            for i in 0..h {
                for j in 0..w {
                    out[ci * 4 * h * w + (2 * i + a) * w2 + 2 * j + b] =
                        gdata[ci * h * w + i * w + j];
                }
            }
        }
    }
    out
}

/// Interleaves 4 groups into a 2×-larger grid; group `g` lands at sub-pixel
/// `(g / 2, g % 2)` of every 2×2 cell.
pub fn pixel_shuffle<T: Scalar>(groups: &[Tensor<T>]) -> Result<Tensor<T>> {
    let refs: Vec<&Tensor<T>> = groups.iter().collect();
    let (c, h, w) = check_groups(&refs)?;
    let data: Vec<&[T]> = groups.iter().map(Tensor::data).collect();
    Tensor::new(&[c, 2 * h, 2 * w], shuffle_into(&data, c, h, w))
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Scalar>(x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let (c, h2, w2) = x.chw()?;
    if h2 % 2 != 0 || w2 % 2 != 0 {
        return Err(config_err!(
            "pixel unshuffle needs even dims, got {h2}×{w2}"
        ));
    }
    let (h, w) = (h2 / 2, w2 / 2);
    let d = x.data();
    Ok((0..4)
        .map(|gi| {
            let (a, b) = (gi / 2, gi % 2);
            Tensor::from_fn(&[c, h, w], |idx| {
                let (ci, r) = (idx / (h * w), idx % (h * w));
                d[ci * h2 * w2 + (2 * (r / w) + a) * w2 + 2 * (r % w) + b]
            })
        })
        .collect())
}

pub fn pixel_shuffle_var<T: Scalar>(g: &mut Graph<'_, T>, groups: &[Var]) -> Result<Var> {
    let refs: Vec<&Tensor<T>> = groups.iter().map(|&v| g.value(v)).collect();
    let (c, h, w) = check_groups(&refs)?;
    let data: Vec<&[T]> = refs.iter().map(|t| t.data()).collect();
    let out = Tensor::new(&[c, 2 * h, 2 * w], shuffle_into(&data, c, h, w))?;
    Ok(g.record(out, groups, |ctx| {
        let parts = pixel_unshuffle(ctx.grad).unwrap();
        parts
            .into_iter()
            .zip(ctx.needs)
            .map(|(p, &n)| n.then_some(p))
            .collect()
    }))
}

/// Content-aware reassembly at scale 1: a 3×3 convolution over the context
/// predicts `k_up²` taps per pixel, normalized into a low-pass field that
/// filters the input.
#[derive(Clone, Debug)]
pub struct Carafe {
    pub k_up: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Carafe {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        context_channels: usize,
        k_up: usize,
    ) -> Result<Self> {
        check_odd(k_up)?;
        Ok(Self {
            k_up,
            weight: b.normal("kernel_pred.weight", &[k_up * k_up, context_channels, 3, 3])?,
            bias: b.zeros("kernel_pred.bias", &[k_up * k_up])?,
        })
    }

    /// Normalized reassembly kernels predicted from `context`.
    pub fn kernels<T: Scalar>(&self, g: &mut Graph<'_, T>, context: Var) -> Result<Var> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        let raw = ops::conv2d(g, context, w, Some(b), 1, Padding::Reflect(1))?;
        normalize_kernels_var(g, raw, 1, self.k_up, false)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var, context: Var) -> Result<Var> {
        let (_, h, w) = g.value(x).chw()?;
        let (_, ch, cw) = g.value(context).chw()?;
        if (h, w) != (ch, cw) {
            return Err(config_err!(
                "reassembly context is {ch}×{cw}, features are {h}×{w}"
            ));
        }
        let kernels = self.kernels(g, context)?;
        apply_kernels_var(g, x, kernels, self.k_up)
    }
}

/// Tensor-level reassembly with explicit predictor weights.
pub fn carafe_reassemble<T: Scalar>(
    x: &Tensor<T>,
    context: &Tensor<T>,
    pred_weight: &Tensor<T>,
    pred_bias: &Tensor<T>,
    k_up: usize,
) -> Result<Tensor<T>> {
    let raw = ops::conv2d_forward(
        context,
        pred_weight,
        Some(pred_bias),
        1,
        Padding::Reflect(1),
    )?;
    let field = normalize_kernels(&raw, k_up, false)?;
    apply_kernel_field(x, &field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field_sums(f: &KernelField<f64>) -> Vec<f64> {
        let (h, w) = (f.height(), f.width());
        (0..h * w)
            .map(|p| (0..f.k * f.k).map(|t| f.weights[t * h * w + p]).sum())
            .collect()
    }

    #[test]
    fn uniform_softmax() {
        let f = normalize_kernels(&Tensor::<f64>::zeros(&[9, 2, 2]), 3, false).unwrap();
        assert!(f
            .weights
            .data()
            .iter()
            .all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn saturated_softmax() {
        let mut raw = Tensor::<f64>::zeros(&[9, 1, 1]);
        raw[4] = 50.0;
        let f = normalize_kernels(&raw, 3, false).unwrap();
        assert!(f.weights[4] > 1.0 - 1e-9);
    }

    #[test]
    fn hamming_windowed_uniform_kernel() {
        let f = normalize_kernels(&Tensor::<f64>::zeros(&[9, 1, 1]), 3, true).unwrap();
        // taps ∝ outer((0.08, 1, 0.08)); centre = 1 / (1 + 4·0.08 + 4·0.0064)
        let centre = 1.0 / (1.0 + 4.0 * 0.08 + 4.0 * 0.0064);
        assert!((f.weights[4] - centre).abs() < 1e-12);
        assert!((f.weights[4] - 0.743163).abs() < 1e-6);
        assert!((f.weights[0] - 0.0064 * centre).abs() < 1e-12);
    }

    #[test]
    fn hamming_windows() {
        let h = hamming_window(3);
        assert!(
            (h[0] - 0.08).abs() < 1e-15
                && (h[1] - 1.0).abs() < 1e-15
                && (h[2] - 0.08).abs() < 1e-15
        );
        for k in [3, 5, 7, 9] {
            let w2 = hamming_window_2d(k);
            assert!((w2[k * k / 2] - 1.0).abs() < 1e-12);
        }
        assert_eq!(hamming_window_2d(1), vec![1.0]);
    }

    #[test]
    fn even_kernels_rejected() {
        assert!(matches!(
            normalize_kernels(&Tensor::<f32>::zeros(&[16, 2, 2]), 4, false),
            Err(Error::Config(_))
        ));
        let f = KernelField {
            k: 4,
            kind: KernelKind::LowPass,
            weights: Tensor::<f32>::zeros(&[16, 1, 1]),
        };
        assert!(invert_to_highpass(&f).is_err());
    }

    #[test]
    fn highpass_inversion_cases() {
        let low = normalize_kernels(&Tensor::<f64>::zeros(&[9, 1, 1]), 3, false).unwrap();
        let high = invert_to_highpass(&low).unwrap();
        assert_eq!(high.kind, KernelKind::HighPass);
        assert!((high.weights[4] - 8.0 / 9.0).abs() < 1e-15);
        assert!((high.weights[0] + 1.0 / 9.0).abs() < 1e-15);
        assert!(field_sums(&high)[0].abs() < 1e-15);

        let mut onehot = Tensor::<f64>::zeros(&[9, 1, 1]);
        onehot[4] = 1.0;
        let low = KernelField {
            k: 3,
            kind: KernelKind::LowPass,
            weights: onehot,
        };
        assert!(invert_to_highpass(&low)
            .unwrap()
            .weights
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(matches!(
            invert_to_highpass(&invert_to_highpass(&low).unwrap()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn kind_contracts() {
        let x = Tensor::<f32>::zeros(&[1, 3, 3]);
        let low = normalize_kernels(&Tensor::zeros(&[9, 3, 3]), 3, false).unwrap();
        let high = invert_to_highpass(&low).unwrap();
        assert!(matches!(apply_highpass(&x, &low), Err(Error::Contract(_))));
        let groups = vec![high.clone(), low.clone(), low.clone(), low];
        assert!(matches!(
            apply_lowpass_grouped(&x, &groups),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn pixel_shuffle_ordering() {
        let groups: Vec<Tensor<f32>> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&v| Tensor::full(&[1, 1, 1], v))
            .collect();
        let y = pixel_shuffle(&groups).unwrap();
        assert_eq!(y.dims(), &[1, 2, 2]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(pixel_shuffle(&groups[..3]).is_err());
        let big: Vec<Tensor<f32>> = (0..4).map(|_| Tensor::zeros(&[8, 16, 16])).collect();
        assert_eq!(pixel_shuffle(&big).unwrap().dims(), &[8, 32, 32]);
    }

    fn raw_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-30.0f64..30.0, k * k * 6)
    }

    proptest! {
        #[test]
        fn normalized_fields_sum_to_one(raw in raw_strategy(5), hamming: bool) {
            let f = normalize_kernels(&Tensor::new(&[25, 2, 3], raw).unwrap(), 5, hamming).unwrap();
            prop_assert!(f.weights.data().iter().all(|&v| v >= 0.0));
            for s in field_sums(&f) { prop_assert!((s - 1.0).abs() < 1e-5); }
            let hp = invert_to_highpass(&f).unwrap();
            for s in field_sums(&hp) { prop_assert!(s.abs() < 1e-5); }
        }

        #[test]
        fn shuffle_round_trip(vals in proptest::collection::vec(-1e3f32..1e3, 4 * 2 * 3 * 5)) {
            let groups: Vec<Tensor<f32>> = vals.chunks(30).map(|c| Tensor::new(&[2, 3, 5], c.to_vec()).unwrap()).collect();
            let back = pixel_unshuffle(&pixel_shuffle(&groups).unwrap()).unwrap();
            prop_assert_eq!(back, groups);
        }

        #[test]
        fn lowpass_stays_in_neighbourhood_envelope(x in proptest::collection::vec(-5.0f64..5.0, 25), raw in raw_strategy(3)) {
            let x = Tensor::new(&[1, 5, 5], x).unwrap();
            let raw = Tensor::new(&[9, 5, 5], raw.into_iter().cycle().take(225).collect()).unwrap();
            let f = normalize_kernels(&raw, 3, false).unwrap();
            let y = apply_kernel_field(&x, &f).unwrap();
            for i in 0..5isize {
                for j in 0..5isize {
                    let nb: Vec<f64> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b)))
                        .map(|(a, b)| x[reflect_index(i + a, 5) * 5 + reflect_index(j + b, 5)]).collect();
                    let lo = nb.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = nb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let v = y[(i * 5 + j) as usize];
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }
}
