//! Shifted-window self-attention and its prior-modulated variant.
//!
//! A SIM block multiplies (or log-biases) the pre-softmax `QKᵀ` scores of
//! every window by `M_sem ⊙ M_geo`: a semantic-similarity map from the
//! cosine between feature vectors and a geometric-consistency map from
//! point-to-plane distances between back-projected pixels.

use std::rc::Rc;

use crate::autograd::{Graph, Var};
use crate::error::{config_err, Result};
use crate::geometry::CameraIntrinsics;
use crate::layers::Conv;
use crate::ops::{self, reflect_index};
use crate::param::{ParamBuilder, ParamId};
use crate::tensor::{Scalar, Tensor};

/// Token ↔ pixel bookkeeping for one (window, shift) partition of an
/// `H×W` map. The map is reflect-padded to a multiple of the window, then
/// cyclically shifted by `(-shift, -shift)`, then cut into windows.
#[derive(Clone, Debug)]
pub struct WindowLayout {
    pub h: usize,
    pub w: usize,
    pub window: usize,
    pub shift: usize,
    pub padded_h: usize,
    pub padded_w: usize,
    /// Source pixel of every window token, window-major.
    src: Vec<u32>,
    /// Token that owns every original pixel.
    dst: Vec<u32>,
}

impl WindowLayout {
    pub fn new(h: usize, w: usize, window: usize, shift: usize) -> Result<Self> {
        if window == 0 || h == 0 || w == 0 {
            return Err(config_err!("window {window} over {h}×{w} map"));
        }
        if shift >= window {
            return Err(config_err!(
                "shift {shift} must be smaller than window {window}"
            ));
        }
        let padded_h = h.div_ceil(window) * window;
        let padded_w = w.div_ceil(window) * window;
        let (nwy, nwx) = (padded_h / window, padded_w / window);
        let mut src = Vec::with_capacity(padded_h * padded_w);
        let mut dst = vec![u32::MAX; h * w];
        for wy in 0..nwy {
            for wx in 0..nwx {
                for ty in 0..window {
                    for tx in 0..window {
                        let py = (wy * window + ty + shift) % padded_h;
                        let px = (wx * window + tx + shift) % padded_w;
                        let sy = reflect_index(py as isize, h);
                        let sx = reflect_index(px as isize, w);
                        if py < h && px < w {
                            dst[py * w + px] = src.len() as u32;
                        }
                        src.push((sy * w + sx) as u32);
                    }
                }
            }
        }
        Ok(Self {
            h,
            w,
            window,
            shift,
            padded_h,
            padded_w,
            src,
            dst,
        })
    }

    /// Shrinks the window to the map when the map fits inside one window, and
    /// drops the shift in that case.
    pub fn fitted(h: usize, w: usize, window: usize, shift: usize) -> Result<Self> {
        if h <= window && w <= window {
            Self::new(h, w, h.max(w), 0)
        } else {
            Self::new(h, w, window, shift)
        }
    }

    pub fn tokens_per_window(&self) -> usize {
        self.window * self.window
    }

    pub fn num_windows(&self) -> usize {
        self.src.len() / self.tokens_per_window()
    }

    /// Source pixel (flat `y·W + x`) of token `t` in window `wi`.
    pub fn source_pixel(&self, wi: usize, t: usize) -> usize {
        self.src[wi * self.tokens_per_window() + t] as usize
    }

    /// Cuts a `C×H×W` map into `C×window×window` windows.
    pub fn partition<T: Scalar>(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (c, h, w) = x.chw()?;
        if (h, w) != (self.h, self.w) {
            return Err(config_err!(
                "layout is for {}×{}, map is {h}×{w}",
                self.h,
                self.w
            ));
        }
        let n = self.tokens_per_window();
        let d = x.data();
        Ok((0..self.num_windows())
            .map(|wi| {
                let s = &self.src[wi * n..(wi + 1) * n];
                Tensor::from_fn(&[c, self.window, self.window], |i| {
                    d[(i / n) * h * w + s[i % n] as usize]
                })
            })
            .collect())
    }

    /// Inverse of [`WindowLayout::partition`]: undoes the shift and crops the padding.
    pub fn reverse<T: Scalar>(&self, windows: &[Tensor<T>]) -> Result<Tensor<T>> {
        if windows.len() != self.num_windows() {
            return Err(config_err!(
                "expected {} windows, got {}",
                self.num_windows(),
                windows.len()
            ));
        }
        let (c, _, _) = windows[0].chw()?;
        let n = self.tokens_per_window();
        let hw = self.h * self.w;
        Ok(Tensor::from_fn(&[c, self.h, self.w], |i| {
            let (ci, p) = (i / hw, i % hw);
            let tok = self.dst[p] as usize;
            windows[tok / n][ci * n + tok % n]
        }))
    }
}

/// `(1 + cos(S_a, S_b)) / 2` over the rows of an `n×d` feature matrix.
/// Bit-identical rows map to exactly 1; rows with norm below `1e-8` have
/// cosine 0 against anything else.
pub fn semantic_similarity_map(features: &[f32], n: usize, d: usize) -> Vec<f64> {
    let rows: Vec<&[f32]> = features.chunks(d.max(1)).take(n).collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut m = vec![1.0; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let v = if rows[a] == rows[b] && norms[a] >= 1e-8 {
                1.0
            } else if norms[a] < 1e-8 || norms[b] < 1e-8 {
                0.5
            } else {
                let dot: f64 = rows[a]
                    .iter()
                    .zip(rows[b])
                    .map(|(&x, &y)| x as f64 * y as f64)
                    .sum();
                (1.0 + (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0)) / 2.0
            };
            m[a * n + b] = v;
            m[b * n + a] = v;
        }
    }
    m
}

/// Geometric consistency between back-projected points with normals.
#[derive(Clone, Debug)]
pub struct GeometricMap {
    /// `n×n`, values in `(0, 1]`.
    pub values: Vec<f64>,
    /// Tokens whose normal was unusable (their rows and columns are 1).
    pub invalid: Vec<bool>,
}

/// `exp(-d(a,b)/τ)` with `d` the mean of the two point-to-plane distances
/// `|N_a·(p_b − p_a)|` and `|N_b·(p_a − p_b)|`.
pub fn geometric_consistency_map(
    points: &[[f64; 3]],
    normals: &[[f64; 3]],
    tau: f64,
) -> GeometricMap {
    let n = points.len();
    let invalid: Vec<bool> = normals
        .iter()
        .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2] < 0.25)
        .collect();
    let mut values = vec![1.0; n * n];
    for a in 0..n {
        if invalid[a] {
            continue;
        }
        for b in (a + 1)..n {
            if invalid[b] {
                continue;
            }
            let diff = [
                points[b][0] - points[a][0],
                points[b][1] - points[a][1],
                points[b][2] - points[a][2],
            ];
            let da =
                (normals[a][0] * diff[0] + normals[a][1] * diff[1] + normals[a][2] * diff[2]).abs();
            let db =
                (normals[b][0] * diff[0] + normals[b][1] * diff[1] + normals[b][2] * diff[2]).abs();
            let v = (-(da + db) / (2.0 * tau)).exp();
            values[a * n + b] = v;
            values[b * n + a] = v;
        }
    }
    GeometricMap { values, invalid }
}

/// How the prior map enters the pre-softmax scores.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Modulation {
    /// `scores ⊙ M`
    #[default]
    Multiply,
    /// `scores + ln M`
    LogBias,
}

impl std::str::FromStr for Modulation {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mul" | "multiply" => Ok(Modulation::Multiply),
            "logbias" => Ok(Modulation::LogBias),
            other => Err(config_err!(
                "unknown modulation {other:?} (expected mul or logbias)"
            )),
        }
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modulation::Multiply => "mul",
            Modulation::LogBias => "logbias",
        })
    }
}

const MIN_LOG_MOD: f64 = 1e-30;

/// Single-head attention over one window. `q`, `k`, `v` are `n×d`
/// row-major; returns `(output n×d, probabilities n×n)`.
fn attend<T: Scalar>(
    q: &[T],
    k: &[T],
    v: &[T],
    n: usize,
    d: usize,
    m: Option<&[T]>,
    mode: Modulation,
) -> (Vec<T>, Vec<T>) {
    let scale = T::one() / T::from_usize(d).unwrap().sqrt();
    let mut s = vec![T::zero(); n * n];
    T::gemm(
        n,
        d,
        n,
        scale,
        q,
        d as isize,
        1,
        k,
        1,
        d as isize,
        T::zero(),
        &mut s,
        n as isize,
        1,
    );
    if let Some(m) = m {
        match mode {
            Modulation::Multiply => s.iter_mut().zip(m).for_each(|(a, &b)| *a *= b),
            Modulation::LogBias => s
                .iter_mut()
                .zip(m)
                .for_each(|(a, &b)| *a += b.max(T::cst(MIN_LOG_MOD)).ln()),
        }
    }
    for row in s.chunks_mut(n) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - mx).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    let mut o = vec![T::zero(); n * d];
    T::gemm(
        n,
        n,
        d,
        T::one(),
        &s,
        n as isize,
        1,
        v,
        d as isize,
        1,
        T::zero(),
        &mut o,
        d as isize,
        1,
    );
    (o, s)
}

/// Multi-head attention over one window with `Q, K, V` laid out `n×h×d_h`.
/// The modulation maps (`n×n`) broadcast over heads; `None` means `M ≡ 1`.
/// Returns the `n×h×d_h` output and the `h×n×n` post-softmax weights.
pub fn modulated_window_attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    m_sem: Option<&[T]>,
    m_geo: Option<&[T]>,
    mode: Modulation,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let [n, h, d] = *q.dims() else {
        return Err(config_err!(
            "attention inputs must be n×h×d, got {:?}",
            q.dims()
        ));
    };
    if k.dims() != q.dims() || v.dims() != q.dims() {
        return Err(config_err!("Q, K, V dims differ"));
    }
    let combined: Option<Vec<T>> = match (m_sem, m_geo) {
        (None, None) => None,
        (Some(a), None) | (None, Some(a)) => Some(a.to_vec()),
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(&x, &y)| x * y).collect()),
    };
    if let Some(m) = &combined {
        if m.len() != n * n {
            return Err(config_err!("modulation map must be {n}×{n}"));
        }
    }
    let head = |t: &Tensor<T>, hd: usize| -> Vec<T> {
        (0..n * d)
            .map(|i| t[(i / d) * h * d + hd * d + i % d])
            .collect()
    };
    let mut out = Tensor::zeros(&[n, h, d]);
    let mut probs = Tensor::zeros(&[h, n, n]);
    for hd in 0..h {
        let (o, p) = attend(
            &head(q, hd),
            &head(k, hd),
            &head(v, hd),
            n,
            d,
            combined.as_deref(),
            mode,
        );
        for i in 0..n * d {
            out[(i / d) * h * d + hd * d + i % d] = o[i];
        }
        probs.data_mut()[hd * n * n..(hd + 1) * n * n].copy_from_slice(&p);
    }
    Ok((out, probs))
}

/// Priors at one feature resolution. Depth is `1×H×W`, normals `3×H×W`,
/// semantic features `d_sem×H×W`.
#[derive(Clone, Debug)]
pub struct StagePriors {
    pub depth: Tensor<f32>,
    pub normals: Tensor<f32>,
    pub semantic: Tensor<f32>,
    pub intrinsics: CameraIntrinsics,
}

impl StagePriors {
    pub fn hw(&self) -> (usize, usize) {
        (self.depth.dims()[1], self.depth.dims()[2])
    }

    /// Per-window `M_sem ⊙ M_geo` for `layout`, or `None` when both maps are
    /// disabled.
    pub fn modulation<T: Scalar>(
        &self,
        layout: &WindowLayout,
        sim: &SimConfig,
    ) -> Result<Option<Vec<Vec<T>>>> {
        if !sim.use_semantic && !sim.use_geometry {
            return Ok(None);
        }
        let (h, w) = self.hw();
        if (h, w) != (layout.h, layout.w) {
            return Err(config_err!(
                "priors are {h}×{w}, features are {}×{}",
                layout.h,
                layout.w
            ));
        }
        let hw = h * w;
        let n = layout.tokens_per_window();
        let d_sem = self.semantic.dims()[0];
        let (depth, nrm, sem) = (self.depth.data(), self.normals.data(), self.semantic.data());
        let mut maps = Vec::with_capacity(layout.num_windows());
        for wi in 0..layout.num_windows() {
            let pix: Vec<usize> = (0..n).map(|t| layout.source_pixel(wi, t)).collect();
            let mut m = vec![1.0f64; n * n];
            if sim.use_semantic {
                let feats: Vec<f32> = pix
                    .iter()
                    .flat_map(|&p| (0..d_sem).map(move |c| sem[c * hw + p]))
                    .collect();
                let ms = semantic_similarity_map(&feats, n, d_sem);
                m.iter_mut().zip(&ms).for_each(|(a, b)| *a *= b);
            }
            if sim.use_geometry {
                let points: Vec<[f64; 3]> = pix
                    .iter()
                    .map(|&p| {
                        self.intrinsics
                            .unproject((p % w) as f64, (p / w) as f64, depth[p] as f64)
                    })
                    .collect();
                let normals: Vec<[f64; 3]> = pix
                    .iter()
                    .map(|&p| [nrm[p] as f64, nrm[hw + p] as f64, nrm[2 * hw + p] as f64])
                    .collect();
                let mg = geometric_consistency_map(&points, &normals, sim.tau_geo);
                m.iter_mut().zip(&mg.values).for_each(|(a, b)| *a *= b);
            }
            maps.push(m.into_iter().map(T::cst).collect());
        }
        Ok(Some(maps))
    }
}

/// Priors for every encoder level plus the bottleneck, finest first.
#[derive(Clone, Debug)]
pub struct PriorStack {
    pub stages: Vec<StagePriors>,
}

/// Prior-modulation settings shared by every SIM block.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub tau_geo: f64,
    pub mode: Modulation,
    pub use_semantic: bool,
    pub use_geometry: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tau_geo: 0.5,
            mode: Modulation::Multiply,
            use_semantic: true,
            use_geometry: true,
        }
    }
}

/// Differentiable windowed multi-head attention. `qkv` stacks Q, K and V
/// along channels (`3C×H×W`); the output is `C×H×W`.
pub fn window_attention<T: Scalar>(
    g: &mut Graph<'_, T>,
    qkv: Var,
    heads: usize,
    layout: Rc<WindowLayout>,
    modulation: Option<Rc<Vec<Vec<T>>>>,
    mode: Modulation,
) -> Result<Var> {
    let (c3, h, w) = g.value(qkv).chw()?;
    if c3 % 3 != 0 || (c3 / 3) % heads != 0 {
        return Err(config_err!(
            "qkv has {c3} channels, not divisible into 3 × {heads} heads"
        ));
    }
    if (h, w) != (layout.h, layout.w) {
        return Err(config_err!(
            "layout is for {}×{}, map is {h}×{w}",
            layout.h,
            layout.w
        ));
    }
    let c = c3 / 3;
    let d = c / heads;
    let hw = h * w;
    let n = layout.tokens_per_window();
    let nw = layout.num_windows();
    if let Some(m) = &modulation {
        if m.len() != nw || m.iter().any(|mm| mm.len() != n * n) {
            return Err(config_err!(
                "modulation maps do not match the window layout"
            ));
        }
    }
    let gather =
        move |layout: &WindowLayout, data: &[T], part: usize, wi: usize, hd: usize| -> Vec<T> {
            let mut buf = vec![T::zero(); n * d];
            for t in 0..n {
                let p = layout.source_pixel(wi, t);
                for j in 0..d {
                    buf[t * d + j] = data[(part * c + hd * d + j) * hw + p];
                }
            }
            buf
        };
    let x = g.value(qkv).data();
    let mut obuf = vec![T::zero(); nw * heads * n * d];
    let mut probs = vec![T::zero(); nw * heads * n * n];
    for wi in 0..nw {
        let m = modulation.as_ref().map(|m| m[wi].as_slice());
        for hd in 0..heads {
            let (o, p) = attend(
                &gather(&layout, x, 0, wi, hd),
                &gather(&layout, x, 1, wi, hd),
                &gather(&layout, x, 2, wi, hd),
                n,
                d,
                m,
                mode,
            );
            let slot = wi * heads + hd;
            obuf[slot * n * d..(slot + 1) * n * d].copy_from_slice(&o);
            probs[slot * n * n..(slot + 1) * n * n].copy_from_slice(&p);
        }
    }
    let mut out = vec![T::zero(); c * hw];
    for p in 0..hw {
        let tok = layout.dst[p] as usize;
        let (wi, t) = (tok / n, tok % n);
        for hd in 0..heads {
            let o = &obuf[((wi * heads + hd) * n + t) * d..][..d];
            for j in 0..d {
                out[(hd * d + j) * hw + p] = o[j];
            }
        }
    }
    let out = Tensor::new(&[c, h, w], out)?;
    Ok(g.record(out, &[qkv], move |ctx| {
        let x = ctx.inputs[0].data();
        let dout = ctx.grad.data();
        let scale = T::one() / T::from_usize(d).unwrap().sqrt();
        let mut dx = vec![T::zero(); 3 * c * hw];
        let mut d_o = vec![T::zero(); nw * heads * n * d];
        for p in 0..hw {
            let tok = layout.dst[p] as usize;
            let (wi, t) = (tok / n, tok % n);
            for hd in 0..heads {
                for j in 0..d {
                    d_o[((wi * heads + hd) * n + t) * d + j] = dout[(hd * d + j) * hw + p];
                }
            }
        }
        let mut dp = vec![T::zero(); n * n];
        let mut dq = vec![T::zero(); n * d];
        let mut dk = vec![T::zero(); n * d];
        let mut dv = vec![T::zero(); n * d];
        for wi in 0..nw {
            for hd in 0..heads {
                let slot = wi * heads + hd;
                let pm = &probs[slot * n * n..(slot + 1) * n * n];
                let go = &d_o[slot * n * d..(slot + 1) * n * d];
                let (q, k, v) = (
                    gather(&layout, x, 0, wi, hd),
                    gather(&layout, x, 1, wi, hd),
                    gather(&layout, x, 2, wi, hd),
                );
                // dP = dO Vᵀ, dV = Pᵀ dO
                T::gemm(
                    n,
                    d,
                    n,
                    T::one(),
                    go,
                    d as isize,
                    1,
                    &v,
                    1,
                    d as isize,
                    T::zero(),
                    &mut dp,
                    n as isize,
                    1,
                );
                T::gemm(
                    n,
                    n,
                    d,
                    T::one(),
                    pm,
                    1,
                    n as isize,
                    go,
                    d as isize,
                    1,
                    T::zero(),
                    &mut dv,
                    d as isize,
                    1,
                );
                for (prow, drow) in pm.chunks(n).zip(dp.chunks_mut(n)) {
                    let dot: T = prow.iter().zip(drow.iter()).map(|(&a, &b)| a * b).sum();
                    for (dd, &pp) in drow.iter_mut().zip(prow) {
                        *dd = pp * (*dd - dot);
                    }
                }
                if let (Some(m), Modulation::Multiply) = (&modulation, mode) {
                    dp.iter_mut().zip(&m[wi]).for_each(|(a, &b)| *a *= b);
                }
                // dQ = dS K · scale, dK = dSᵀ Q · scale
                T::gemm(
                    n,
                    n,
                    d,
                    scale,
                    &dp,
                    n as isize,
                    1,
                    &k,
                    d as isize,
                    1,
                    T::zero(),
                    &mut dq,
                    d as isize,
                    1,
                );
                T::gemm(
                    n,
                    n,
                    d,
                    scale,
                    &dp,
                    1,
                    n as isize,
                    &q,
                    d as isize,
                    1,
                    T::zero(),
                    &mut dk,
                    d as isize,
                    1,
                );
                for t in 0..n {
                    let p = layout.source_pixel(wi, t);
                    for j in 0..d {
                        let ch = hd * d + j;
                        dx[ch * hw + p] += dq[t * d + j];
                        dx[(c + ch) * hw + p] += dk[t * d + j];
                        dx[(2 * c + ch) * hw + p] += dv[t * d + j];
                    }
                }
            }
        }
        vec![Some(Tensor::new(&[3 * c, h, w], dx).unwrap())]
    }))
}

/// Whether a block attends plainly or with prior modulation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BlockMode {
    Standard,
    Sim,
}

#[derive(Clone, Debug)]
struct Affine {
    gamma: ParamId,
    beta: ParamId,
}

/// Pre-norm transformer block over a `C×H×W` map:
/// `x + Attn(LN(x))`, then `+ MLP(LN(·))` with a GELU MLP.
#[derive(Clone, Debug)]
pub struct TransformerBlock {
    pub dim: usize,
    pub heads: usize,
    pub window: usize,
    pub shift: usize,
    pub mode: BlockMode,
    norm1: Affine,
    qkv: Conv,
    proj: Conv,
    norm2: Affine,
    fc1: Conv,
    fc2: Conv,
}

const LN_EPS: f64 = 1e-5;

impl TransformerBlock {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        dim: usize,
        heads: usize,
        window: usize,
        shift: usize,
        mlp_ratio: usize,
        mode: BlockMode,
    ) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(config_err!("dim {dim} is not divisible by {heads} heads"));
        }
        let norm1 = Affine {
            gamma: b.ones("norm1.weight", &[dim])?,
            beta: b.zeros("norm1.bias", &[dim])?,
        };
        let qkv = Conv::pointwise(b, "attn.qkv", dim, 3 * dim)?;
        let proj = Conv::pointwise(b, "attn.proj", dim, dim)?;
        let norm2 = Affine {
            gamma: b.ones("norm2.weight", &[dim])?,
            beta: b.zeros("norm2.bias", &[dim])?,
        };
        let fc1 = Conv::pointwise(b, "mlp.fc1", dim, mlp_ratio * dim)?;
        let fc2 = Conv::pointwise(b, "mlp.fc2", mlp_ratio * dim, dim)?;
        Ok(Self {
            dim,
            heads,
            window,
            shift,
            mode,
            norm1,
            qkv,
            proj,
            norm2,
            fc1,
            fc2,
        })
    }

    /// Parameters whose zeroing turns the block into the identity.
    pub fn residual_output_params(&self) -> [ParamId; 4] {
        [
            self.proj.weight,
            self.proj.bias,
            self.fc2.weight,
            self.fc2.bias,
        ]
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        priors: Option<&StagePriors>,
        sim: &SimConfig,
    ) -> Result<Var> {
        let (c, h, w) = g.value(x).chw()?;
        if c != self.dim {
            return Err(config_err!("block expects {} channels, got {c}", self.dim));
        }
        let layout = Rc::new(WindowLayout::fitted(h, w, self.window, self.shift)?);
        let modulation = match self.mode {
            BlockMode::Standard => None,
            BlockMode::Sim => {
                let priors =
                    priors.ok_or_else(|| config_err!("SIM block needs priors at {h}×{w}"))?;
                priors.modulation::<T>(&layout, sim)?.map(Rc::new)
            }
        };
        let (g1, b1) = (g.param(self.norm1.gamma), g.param(self.norm1.beta));
        let n1 = ops::layer_norm_channels(g, x, g1, b1, LN_EPS)?;
        let qkv = self.qkv.forward(g, n1)?;
        let att = window_attention(g, qkv, self.heads, layout, modulation, sim.mode)?;
        let att = self.proj.forward(g, att)?;
        let x = ops::add(g, x, att)?;
        let (g2, b2) = (g.param(self.norm2.gamma), g.param(self.norm2.beta));
        let n2 = ops::layer_norm_channels(g, x, g2, b2, LN_EPS)?;
        let hdn = self.fc1.forward(g, n2)?;
        let hdn = ops::gelu(g, hdn);
        let hdn = self.fc2.forward(g, hdn)?;
        ops::add(g, x, hdn)
    }
}
