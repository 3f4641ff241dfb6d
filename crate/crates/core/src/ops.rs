//! Differentiable operations recorded on a [`Graph`].
//!
//! Feature maps are `C×H×W`. Convolutions lower to GEMM through an
//! im2col gather table shared by the forward and backward passes.

use crate::autograd::{Graph, Var};
use crate::error::{config_err, Result};
use crate::tensor::{matmul, Scalar, Tensor};

/// Border handling for convolutions and local filters.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Padding {
    Zero(usize),
    Reflect(usize),
}

impl Padding {
    pub fn margin(self) -> usize {
        match self {
            Padding::Zero(m) | Padding::Reflect(m) => m,
        }
    }
}

/// Mirror index `i` into `[0, n)` without repeating the edge sample.
#[inline]
pub fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

pub fn conv_out_dim(n: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if n + 2 * pad < k {
        return Err(config_err!(
            "kernel {k} larger than padded extent {}",
            n + 2 * pad
        ));
    }
    Ok((n + 2 * pad - k) / stride + 1)
}

/// Gather table for im2col: entry `(t, o)` is the flat source pixel for tap
/// `t` of output pixel `o`, or `u32::MAX` for a zero-padded tap.
struct Im2Col {
    k: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    src: Vec<u32>,
}

const PAD: u32 = u32::MAX;

impl Im2Col {
    fn new(h: usize, w: usize, k: usize, stride: usize, pad: Padding) -> Result<Self> {
        let m = pad.margin();
        let ho = conv_out_dim(h, k, stride, m)?;
        let wo = conv_out_dim(w, k, stride, m)?;
        let mut src = Vec::with_capacity(k * k * ho * wo);
        for ki in 0..k {
            for kj in 0..k {
                for oy in 0..ho {
                    let y = (oy * stride + ki) as isize - m as isize;
                    for ox in 0..wo {
                        let x = (ox * stride + kj) as isize - m as isize;
                        let inside = y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w;
                        let idx = match pad {
                            _ if inside => (y as usize * w + x as usize) as u32,
                            Padding::Zero(_) => PAD,
                            Padding::Reflect(_) => {
                                (reflect_index(y, h) * w + reflect_index(x, w)) as u32
                            }
                        };
                        src.push(idx);
                    }
                }
            }
        }
        Ok(Self {
            k,
            h,
            w,
            ho,
            wo,
            src,
        })
    }

    fn cols<T: Scalar>(&self, x: &[T], c: usize) -> Vec<T> {
        let (hw, kk, o) = (self.h * self.w, self.k * self.k, self.ho * self.wo);
        let mut col = vec![T::zero(); c * kk * o];
        for ci in 0..c {
            let plane = &x[ci * hw..(ci + 1) * hw];
            let dst = &mut col[ci * kk * o..(ci + 1) * kk * o];
            for (d, &s) in dst.iter_mut().zip(&self.src) {
                if s != PAD {
                    *d = plane[s as usize];
                }
            }
        }
        col
    }

    fn scatter<T: Scalar>(&self, col: &[T], c: usize, dx: &mut [T]) {
        let (hw, kk, o) = (self.h * self.w, self.k * self.k, self.ho * self.wo);
        for ci in 0..c {
            let plane = &mut dx[ci * hw..(ci + 1) * hw];
            let srcc = &col[ci * kk * o..(ci + 1) * kk * o];
            for (&v, &s) in srcc.iter().zip(&self.src) {
                if s != PAD {
                    plane[s as usize] += v;
                }
            }
        }
    }

    fn is_identity(&self) -> bool {
        self.k == 1
            && self.ho == self.h
            && self.wo == self.w
            && self.src.iter().enumerate().all(|(i, &s)| s as usize == i)
    }
}

/// Plain convolution on tensors: `weights` is `C_out×C_in×k×k`.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: Padding,
) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw()?;
    let (co, k) = check_conv_weights(weights, c, bias)?;
    if stride == 0 {
        return Err(config_err!("stride must be at least 1"));
    }
    let map = Im2Col::new(h, w, k, stride, pad)?;
    Ok(conv_apply(
        x.data(),
        c,
        weights.data(),
        co,
        bias.map(|b| b.data()),
        &map,
    ))
}

fn check_conv_weights<T: Scalar>(
    weights: &Tensor<T>,
    c: usize,
    bias: Option<&Tensor<T>>,
) -> Result<(usize, usize)> {
    let [co, ci, k, k2] = weights.dims()[..] else {
        return Err(config_err!(
            "conv weights must be C_out×C_in×k×k, got {:?}",
            weights.dims()
        ));
    };
    if k != k2 || k == 0 {
        return Err(config_err!(
            "conv kernel must be square and non-empty, got {k}×{k2}"
        ));
    }
    if ci != c {
        return Err(config_err!(
            "conv expects {ci} input channels, input has {c}"
        ));
    }
    if let Some(b) = bias {
        if b.dims() != [co] {
            return Err(config_err!(
                "conv bias must have dims [{co}], got {:?}",
                b.dims()
            ));
        }
    }
    Ok((co, k))
}

fn conv_apply<T: Scalar>(
    x: &[T],
    c: usize,
    w: &[T],
    co: usize,
    bias: Option<&[T]>,
    map: &Im2Col,
) -> Tensor<T> {
    let o = map.ho * map.wo;
    let kdim = c * map.k * map.k;
    let mut out = vec![T::zero(); co * o];
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_mut(o).zip(b) {
            row.fill(bv);
        }
    }
    if map.is_identity() {
        matmul(w, false, x, false, co, kdim, o, &mut out, true);
    } else {
        let col = map.cols(x, c);
        matmul(w, false, &col, false, co, kdim, o, &mut out, true);
    }
    Tensor::new(&[co, map.ho, map.wo], out).expect("conv output dims")
}

/// Differentiable 2D convolution.
pub fn conv2d<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    weights: Var,
    bias: Option<Var>,
    stride: usize,
    pad: Padding,
) -> Result<Var> {
    let (c, h, w) = g.value(x).chw()?;
    let (co, k) = check_conv_weights(g.value(weights), c, bias.map(|b| g.value(b)))?;
    if stride == 0 {
        return Err(config_err!("stride must be at least 1"));
    }
    let map = Im2Col::new(h, w, k, stride, pad)?;
    let out = conv_apply(
        g.value(x).data(),
        c,
        g.value(weights).data(),
        co,
        bias.map(|b| g.value(b).data()),
        &map,
    );
    let mut inputs = vec![x, weights];
    inputs.extend(bias);
    Ok(g.record(out, &inputs, move |ctx| {
        let (xv, wv) = (ctx.inputs[0], ctx.inputs[1]);
        let o = map.ho * map.wo;
        let kdim = c * k * k;
        let dy = ctx.grad.data();
        let identity = map.is_identity();
        let col = if ctx.needs[1] && !identity {
            Some(map.cols(xv.data(), c))
        } else {
            None
        };
        let dw = ctx.needs[1].then(|| {
            let mut dw = vec![T::zero(); co * kdim];
            let colref = col.as_deref().unwrap_or(xv.data());
            matmul(dy, false, colref, true, co, o, kdim, &mut dw, false);
            Tensor::new(wv.dims(), dw).unwrap()
        });
        let dx = ctx.needs[0].then(|| {
            if identity {
                let mut dx = vec![T::zero(); kdim * o];
                matmul(wv.data(), true, dy, false, kdim, co, o, &mut dx, false);
                Tensor::new(xv.dims(), dx).unwrap()
            } else {
                let mut dcol = vec![T::zero(); kdim * o];
                matmul(wv.data(), true, dy, false, kdim, co, o, &mut dcol, false);
                let mut dx = vec![T::zero(); xv.len()];
                map.scatter(&dcol, c, &mut dx);
                Tensor::new(xv.dims(), dx).unwrap()
            }
        });
        let mut res = vec![dx, dw];
        if ctx.inputs.len() == 3 {
            res.push(
                ctx.needs[2].then(|| {
                    Tensor::from_fn(&[co], |i| dy[i * o..(i + 1) * o].iter().copied().sum())
                }),
            );
        }
        res
    }))
}

/// 2×2 stride-2 transposed convolution on tensors; `weights` is `C_in×C_out×2×2`.
pub fn conv_transpose2x2_forward<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw()?;
    let co = check_tconv(weights, c, bias)?;
    Ok(tconv_apply(
        x.data(),
        c,
        h,
        w,
        weights.data(),
        co,
        bias.map(|b| b.data()),
    ))
}

fn check_tconv<T: Scalar>(
    weights: &Tensor<T>,
    c: usize,
    bias: Option<&Tensor<T>>,
) -> Result<usize> {
    let [ci, co, 2, 2] = weights.dims()[..] else {
        return Err(config_err!(
            "transposed conv weights must be C_in×C_out×2×2, got {:?}",
            weights.dims()
        ));
    };
    if ci != c {
        return Err(config_err!(
            "transposed conv expects {ci} input channels, input has {c}"
        ));
    }
    if let Some(b) = bias {
        if b.dims() != [co] {
            return Err(config_err!("transposed conv bias must have dims [{co}]"));
        }
    }
    Ok(co)
}

fn tconv_apply<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    wt: &[T],
    co: usize,
    bias: Option<&[T]>,
) -> Tensor<T> {
    let hw = h * w;
    let mut y = vec![T::zero(); co * 4 * hw];
    matmul(wt, true, x, false, co * 4, c, hw, &mut y, false);
    let mut out = vec![T::zero(); co * 4 * hw];
    let w2 = 2 * w;
    for o in 0..co {
        let b = bias.map_or(T::zero(), |b| b[o]);
        for a in 0..2 {
            for bb in 0..2 {
                let row = &y[(o * 4 + a * 2 + bb) * hw..][..hw];
                for yy in 0..h {
                    for xx in 0..w {
                        out[o * 4 * hw + (2 * yy + a) * w2 + 2 * xx + bb] = row[yy * w + xx] + b;
                    }
                }
            }
        }
    }
    Tensor::new(&[co, 2 * h, 2 * w], out).unwrap()
}

/// Differentiable 2×2 stride-2 transposed convolution (exact 2× upsampling).
pub fn conv_transpose2x2<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    weights: Var,
    bias: Option<Var>,
) -> Result<Var> {
    let (c, h, w) = g.value(x).chw()?;
    let co = check_tconv(g.value(weights), c, bias.map(|b| g.value(b)))?;
    let out = tconv_apply(
        g.value(x).data(),
        c,
        h,
        w,
        g.value(weights).data(),
        co,
        bias.map(|b| g.value(b).data()),
    );
    let mut inputs = vec![x, weights];
    inputs.extend(bias);
    Ok(g.record(out, &inputs, move |ctx| {
        let hw = h * w;
        let w2 = 2 * w;
        let dout = ctx.grad.data();
        let mut dy = vec![T::zero(); co * 4 * hw];
        for o in 0..co {
            for a in 0..2 {
                for bb in 0..2 {
                    let row = &mut dy[(o * 4 + a * 2 + bb) * hw..][..hw];
                    for yy in 0..h {
                        for xx in 0..w {
                            row[yy * w + xx] = dout[o * 4 * hw + (2 * yy + a) * w2 + 2 * xx + bb];
                        }
                    }
                }
            }
        }
        let dx = ctx.needs[0].then(|| {
            let mut dx = vec![T::zero(); c * hw];
            matmul(
                ctx.inputs[1].data(),
                false,
                &dy,
                false,
                c,
                co * 4,
                hw,
                &mut dx,
                false,
            );
            Tensor::new(ctx.inputs[0].dims(), dx).unwrap()
        });
        let dw = ctx.needs[1].then(|| {
            let mut dw = vec![T::zero(); c * co * 4];
            matmul(
                ctx.inputs[0].data(),
                false,
                &dy,
                true,
                c,
                hw,
                co * 4,
                &mut dw,
                false,
            );
            Tensor::new(ctx.inputs[1].dims(), dw).unwrap()
        });
        let mut res = vec![dx, dw];
        if ctx.inputs.len() == 3 {
            res.push(ctx.needs[2].then(|| {
                Tensor::from_fn(&[co], |o| {
                    dy[o * 4 * hw..(o + 1) * 4 * hw].iter().copied().sum()
                })
            }));
        }
        res
    }))
}

fn unary<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    f: impl Fn(T) -> T,
    df: impl Fn(T) -> T + 'static,
) -> Var {
    let out = g.value(x).map(f);
    g.record(out, &[x], move |ctx| {
        let d = ctx.inputs[0].zip_map(ctx.grad, |x, gr| df(x) * gr).unwrap();
        vec![Some(d)]
    })
}

pub fn leaky_relu<T: Scalar>(g: &mut Graph<'_, T>, x: Var, slope: f64) -> Var {
    let s = T::cst(slope);
    unary(
        g,
        x,
        move |v| if v >= T::zero() { v } else { s * v },
        move |v| if v >= T::zero() { T::one() } else { s },
    )
}

/// GELU, tanh approximation.
pub fn gelu<T: Scalar>(g: &mut Graph<'_, T>, x: Var) -> Var {
    let k = T::cst((2.0 / std::f64::consts::PI).sqrt());
    let a = T::cst(0.044715);
    let half = T::cst(0.5);
    let three = T::cst(3.0);
    unary(
        g,
        x,
        move |v| half * v * (T::one() + (k * (v + a * v * v * v)).tanh()),
        move |v| {
            let t = (k * (v + a * v * v * v)).tanh();
            half * (T::one() + t)
                + half * v * (T::one() - t * t) * k * (T::one() + three * a * v * v)
        },
    )
}

pub fn add<T: Scalar>(g: &mut Graph<'_, T>, a: Var, b: Var) -> Result<Var> {
    let out = g.value(a).zip_map(g.value(b), |x, y| x + y)?;
    Ok(g.record(out, &[a, b], |ctx| {
        vec![Some(ctx.grad.clone()), Some(ctx.grad.clone())]
    }))
}

pub fn sub<T: Scalar>(g: &mut Graph<'_, T>, a: Var, b: Var) -> Result<Var> {
    let out = g.value(a).zip_map(g.value(b), |x, y| x - y)?;
    Ok(g.record(out, &[a, b], |ctx| {
        vec![Some(ctx.grad.clone()), Some(ctx.grad.map(|v| -v))]
    }))
}

pub fn mul<T: Scalar>(g: &mut Graph<'_, T>, a: Var, b: Var) -> Result<Var> {
    let out = g.value(a).zip_map(g.value(b), |x, y| x * y)?;
    Ok(g.record(out, &[a, b], |ctx| {
        vec![
            ctx.needs[0].then(|| ctx.grad.zip_map(ctx.inputs[1], |gr, y| gr * y).unwrap()),
            ctx.needs[1].then(|| ctx.grad.zip_map(ctx.inputs[0], |gr, x| gr * x).unwrap()),
        ]
    }))
}

pub fn scale<T: Scalar>(g: &mut Graph<'_, T>, x: Var, s: f64) -> Var {
    let s = T::cst(s);
    let out = g.value(x).map(|v| v * s);
    g.record(out, &[x], move |ctx| vec![Some(ctx.grad.map(|v| v * s))])
}

/// Sum of all elements, as a one-element tensor.
pub fn sum_all<T: Scalar>(g: &mut Graph<'_, T>, x: Var) -> Var {
    let out = Tensor::scalar(g.value(x).sum());
    g.record(out, &[x], |ctx| {
        vec![Some(Tensor::full(ctx.inputs[0].dims(), ctx.grad[0]))]
    })
}

/// `Σ x ⊙ w` with constant weights; handy as a generic test objective.
pub fn weighted_sum<T: Scalar>(g: &mut Graph<'_, T>, x: Var, weights: Tensor<T>) -> Result<Var> {
    g.value(x).expect_same_dims(&weights)?;
    let s = g
        .value(x)
        .data()
        .iter()
        .zip(weights.data())
        .map(|(&a, &b)| a * b)
        .sum();
    Ok(g.record(Tensor::scalar(s), &[x], move |ctx| {
        vec![Some(weights.map(|w| w * ctx.grad[0]))]
    }))
}

pub fn concat_channels<T: Scalar>(g: &mut Graph<'_, T>, xs: &[Var]) -> Result<Var> {
    let (_, h, w) = g.value(xs[0]).chw()?;
    let mut channels = Vec::with_capacity(xs.len());
    let mut data = Vec::new();
    for &x in xs {
        let (c, hh, ww) = g.value(x).chw()?;
        if (hh, ww) != (h, w) {
            return Err(config_err!("concat spatial mismatch {h}×{w} vs {hh}×{ww}"));
        }
        channels.push(c);
        data.extend_from_slice(g.value(x).data());
    }
    let total: usize = channels.iter().sum();
    let out = Tensor::new(&[total, h, w], data)?;
    Ok(g.record(out, xs, move |ctx| {
        let mut off = 0;
        channels
            .iter()
            .zip(ctx.needs)
            .map(|(&c, &need)| {
                let n = c * h * w;
                let piece = need.then(|| {
                    Tensor::new(&[c, h, w], ctx.grad.data()[off..off + n].to_vec()).unwrap()
                });
                off += n;
                piece
            })
            .collect()
    }))
}

/// Channels `start..start+len` of a C×H×W value.
pub fn slice_channels<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    start: usize,
    len: usize,
) -> Result<Var> {
    let (c, h, w) = g.value(x).chw()?;
    if start + len > c {
        return Err(config_err!(
            "channel slice {start}..{} out of {c}",
            start + len
        ));
    }
    let hw = h * w;
    let out = Tensor::new(
        &[len, h, w],
        g.value(x).data()[start * hw..(start + len) * hw].to_vec(),
    )?;
    Ok(g.record(out, &[x], move |ctx| {
        let mut d = Tensor::zeros(&[c, h, w]);
        d.data_mut()[start * hw..(start + len) * hw].copy_from_slice(ctx.grad.data());
        vec![Some(d)]
    }))
}

/// 2×2 average pooling (H and W must be even).
pub fn avg_pool2<T: Scalar>(g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
    let out = avg_pool2_forward(g.value(x))?;
    let (c, h, w) = g.value(x).chw()?;
    Ok(g.record(out, &[x], move |ctx| {
        let q = T::cst(0.25);
        let (ho, wo) = (h / 2, w / 2);
        let gr = ctx.grad.data();
        let d = Tensor::from_fn(&[c, h, w], |i| {
            let (ci, r) = (i / (h * w), i % (h * w));
            let (y, x) = (r / w, r % w);
            gr[ci * ho * wo + (y / 2) * wo + x / 2] * q
        });
        vec![Some(d)]
    }))
}

pub fn avg_pool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.chw()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(config_err!("avg_pool2 needs even dims, got {h}×{w}"));
    }
    let (ho, wo) = (h / 2, w / 2);
    let d = x.data();
    let q = T::cst(0.25);
    Ok(Tensor::from_fn(&[c, ho, wo], |i| {
        let (ci, r) = (i / (ho * wo), i % (ho * wo));
        let (y, xx) = (2 * (r / wo), 2 * (r % wo));
        let b = ci * h * w;
        (d[b + y * w + xx]
            + d[b + y * w + xx + 1]
            + d[b + (y + 1) * w + xx]
            + d[b + (y + 1) * w + xx + 1])
            * q
    }))
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample_nearest2<T: Scalar>(g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
    let (c, h, w) = g.value(x).chw()?;
    let (ho, wo) = (2 * h, 2 * w);
    let d = g.value(x).data();
    let out = Tensor::from_fn(&[c, ho, wo], |i| {
        let (ci, r) = (i / (ho * wo), i % (ho * wo));
        d[ci * h * w + (r / wo / 2) * w + (r % wo) / 2]
    });
    Ok(g.record(out, &[x], move |ctx| {
        let gr = ctx.grad.data();
        let mut dx = Tensor::zeros(&[c, h, w]);
        for (i, &v) in gr.iter().enumerate() {
            let (ci, r) = (i / (ho * wo), i % (ho * wo));
            dx[ci * h * w + (r / wo / 2) * w + (r % wo) / 2] += v;
        }
        vec![Some(dx)]
    }))
}

/// Keeps the top-left `h×w` window of every channel.
pub fn crop<T: Scalar>(g: &mut Graph<'_, T>, x: Var, h: usize, w: usize) -> Result<Var> {
    let (c, hi, wi) = g.value(x).chw()?;
    if h > hi || w > wi {
        return Err(config_err!("crop {h}×{w} exceeds {hi}×{wi}"));
    }
    if (h, w) == (hi, wi) {
        return Ok(x);
    }
    let d = g.value(x).data();
    let out = Tensor::from_fn(&[c, h, w], |i| {
        let (ci, r) = (i / (h * w), i % (h * w));
        d[ci * hi * wi + (r / w) * wi + r % w]
    });
    Ok(g.record(out, &[x], move |ctx| {
        let mut dx = Tensor::zeros(&[c, hi, wi]);
        for (i, &v) in ctx.grad.data().iter().enumerate() {
            let (ci, r) = (i / (h * w), i % (h * w));
            dx[ci * hi * wi + (r / w) * wi + r % w] = v;
        }
        vec![Some(dx)]
    }))
}

/// Layer normalization over the channel axis at every pixel, with per-channel
/// affine parameters.
pub fn layer_norm_channels<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    gamma: Var,
    beta: Var,
    eps: f64,
) -> Result<Var> {
    let (c, h, w) = g.value(x).chw()?;
    if g.value(gamma).dims() != [c] || g.value(beta).dims() != [c] {
        return Err(config_err!(
            "layer norm affine parameters must have dims [{c}]"
        ));
    }
    let p = h * w;
    let xv = g.value(x).data();
    let (gv, bv) = (g.value(gamma).data(), g.value(beta).data());
    let eps = T::cst(eps);
    let cn = T::from_usize(c).unwrap();
    let mut xhat = vec![T::zero(); c * p];
    let mut inv_std = vec![T::zero(); p];
    for j in 0..p {
        let mean = (0..c).map(|ci| xv[ci * p + j]).sum::<T>() / cn;
        let var = (0..c).map(|ci| (xv[ci * p + j] - mean).powi(2)).sum::<T>() / cn;
        let is = T::one() / (var + eps).sqrt();
        inv_std[j] = is;
        for ci in 0..c {
            xhat[ci * p + j] = (xv[ci * p + j] - mean) * is;
        }
    }
    let out = Tensor::from_fn(&[c, h, w], |i| gv[i / p] * xhat[i] + bv[i / p]);
    Ok(g.record(out, &[x, gamma, beta], move |ctx| {
        let gr = ctx.grad.data();
        let gam = ctx.inputs[1].data();
        let dx = ctx.needs[0].then(|| {
            let mut dx = vec![T::zero(); c * p];
            for j in 0..p {
                let mut m1 = T::zero();
                let mut m2 = T::zero();
                for ci in 0..c {
                    let dxh = gr[ci * p + j] * gam[ci];
                    m1 += dxh;
                    m2 += dxh * xhat[ci * p + j];
                }
                m1 /= cn;
                m2 /= cn;
                for ci in 0..c {
                    let dxh = gr[ci * p + j] * gam[ci];
                    dx[ci * p + j] = inv_std[j] * (dxh - m1 - xhat[ci * p + j] * m2);
                }
            }
            Tensor::new(&[c, h, w], dx).unwrap()
        });
        let dgamma = ctx.needs[1].then(|| {
            Tensor::from_fn(&[c], |ci| {
                (0..p).map(|j| gr[ci * p + j] * xhat[ci * p + j]).sum()
            })
        });
        let dbeta = ctx.needs[2]
            .then(|| Tensor::from_fn(&[c], |ci| gr[ci * p..(ci + 1) * p].iter().copied().sum()));
        vec![dx, dgamma, dbeta]
    }))
}
