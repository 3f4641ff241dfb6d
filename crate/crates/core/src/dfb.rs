//! Dense fusion of an encoder skip (`hr`, `C_hr×2H×2W`) with the deeper
//! decoder path (`lr`, `C_lr×H×W`).
//!
//! Two streams are produced at `2H×2W` and summed:
//! - the smoothing stream upsamples `lr` with four predicted low-pass
//!   kernel fields (one per sub-pixel position) and a pixel shuffle;
//! - the detail stream projects `hr` and adds back its high-frequency part,
//!   extracted with predicted `δ − low-pass` kernels.
//!
//! Each stream is refined by content-aware reassembly driven by the
//! high-resolution context, then projected to `C_out`.

use crate::autograd::{Graph, Var};
use crate::error::{config_err, Error, Result};
use crate::kernel_ops::{self, Carafe};
use crate::layers::Conv;
use crate::ops;
use crate::param::ParamBuilder;
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct DfbConfig {
    pub compressed_channels: usize,
    /// Taps per side of the upsampling low-pass kernels.
    pub k_smooth: usize,
    /// Taps per side of the kernels inverted into high-pass filters.
    pub k_detail: usize,
    /// Taps per side of the reassembly kernels.
    pub k_up: usize,
    pub hamming: bool,
}

impl Default for DfbConfig {
    fn default() -> Self {
        Self {
            compressed_channels: 64,
            k_smooth: 5,
            k_detail: 3,
            k_up: 5,
            hamming: false,
        }
    }
}

impl DfbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.compressed_channels == 0 {
            return Err(config_err!("compressed_channels must be positive"));
        }
        for (name, k) in [
            ("k_smooth", self.k_smooth),
            ("k_detail", self.k_detail),
            ("k_up", self.k_up),
        ] {
            if k % 2 == 0 {
                return Err(config_err!("{name} must be odd, got {k}"));
            }
        }
        Ok(())
    }
}

fn check_pair<T: Scalar>(g: &Graph<'_, T>, hr: Var, lr: Var) -> Result<()> {
    let (_, h2, w2) = g.value(hr).chw()?;
    let (_, h, w) = g.value(lr).chw()?;
    if (h2, w2) != (2 * h, 2 * w) {
        return Err(Error::Contract(format!(
            "high-resolution input {h2}×{w2} is not twice {h}×{w}"
        )));
    }
    Ok(())
}

/// Joint context from compressed inputs at both resolutions.
#[derive(Clone, Debug)]
pub struct ContextBuilder {
    to_low: Conv,
    to_high: Conv,
}

impl ContextBuilder {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, channels: usize) -> Result<Self> {
        Ok(Self {
            to_low: Conv::pointwise(b, "context_lr", 2 * channels, channels)?,
            to_high: Conv::pointwise(b, "context_hr", 2 * channels, channels)?,
        })
    }

    /// `(Z_lr, Z_hr)`: `Z_lr` mixes `lr_c` with average-pooled `hr_c`,
    /// `Z_hr` mixes `hr_c` with nearest-upsampled `lr_c`.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        hr_c: Var,
        lr_c: Var,
    ) -> Result<(Var, Var)> {
        check_pair(g, hr_c, lr_c)?;
        let pooled = ops::avg_pool2(g, hr_c)?;
        let low = ops::concat_channels(g, &[lr_c, pooled])?;
        let z_lr = self.to_low.forward(g, low)?;
        let up = ops::upsample_nearest2(g, lr_c)?;
        let high = ops::concat_channels(g, &[hr_c, up])?;
        let z_hr = self.to_high.forward(g, high)?;
        Ok((z_lr, z_hr))
    }
}

/// Adaptive smoothing upsampler: `C×H×W → C×2H×2W`.
#[derive(Clone, Debug)]
pub struct SmoothUpsampler {
    pub k: usize,
    pub hamming: bool,
    pub predictor: Conv,
}

impl SmoothUpsampler {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        context_channels: usize,
        k: usize,
        hamming: bool,
    ) -> Result<Self> {
        Ok(Self {
            k,
            hamming,
            predictor: Conv::same(b, "kernel_pred", context_channels, 4 * k * k, 3)?,
        })
    }

    /// Normalized `4·K²×H×W` kernels; group `g` occupies channels `g·K²..(g+1)·K²`.
    pub fn kernels<T: Scalar>(&self, g: &mut Graph<'_, T>, context: Var) -> Result<Var> {
        let raw = self.predictor.forward(g, context)?;
        kernel_ops::normalize_kernels_var(g, raw, 4, self.k, self.hamming)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, lr: Var, context: Var) -> Result<Var> {
        let (_, h, w) = g.value(lr).chw()?;
        let (_, ch, cw) = g.value(context).chw()?;
        if (h, w) != (ch, cw) {
            return Err(Error::Contract(format!(
                "smoothing context is {ch}×{cw}, features are {h}×{w}"
            )));
        }
        let kernels = self.kernels(g, context)?;
        let kk = self.k * self.k;
        let mut groups = Vec::with_capacity(4);
        for gi in 0..4 {
            let field = ops::slice_channels(g, kernels, gi * kk, kk)?;
            groups.push(kernel_ops::apply_kernels_var(g, lr, field, self.k)?);
        }
        kernel_ops::pixel_shuffle_var(g, &groups)
    }
}

/// High-frequency recuperation: `X' + HF(X')` with `X'` a 1×1 projection.
#[derive(Clone, Debug)]
pub struct DetailRestorer {
    pub k: usize,
    pub hamming: bool,
    pub projection: Conv,
    pub predictor: Conv,
}

impl DetailRestorer {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        channels: usize,
        context_channels: usize,
        k: usize,
        hamming: bool,
    ) -> Result<Self> {
        Ok(Self {
            k,
            hamming,
            projection: Conv::pointwise(b, "project", channels, channels)?,
            predictor: Conv::same(b, "kernel_pred", context_channels, k * k, 3)?,
        })
    }

    /// `(X', HF(X'))`.
    pub fn parts<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        hr: Var,
        context: Var,
    ) -> Result<(Var, Var)> {
        let (_, h, w) = g.value(hr).chw()?;
        let (_, ch, cw) = g.value(context).chw()?;
        if (h, w) != (ch, cw) {
            return Err(Error::Contract(format!(
                "detail context is {ch}×{cw}, features are {h}×{w}"
            )));
        }
        let projected = self.projection.forward(g, hr)?;
        let raw = self.predictor.forward(g, context)?;
        let low = kernel_ops::normalize_kernels_var(g, raw, 1, self.k, self.hamming)?;
        let high = kernel_ops::invert_to_highpass_var(g, low, self.k)?;
        let detail = kernel_ops::apply_kernels_var(g, projected, high, self.k)?;
        Ok((projected, detail))
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, hr: Var, context: Var) -> Result<Var> {
        let (projected, detail) = self.parts(g, hr, context)?;
        ops::add(g, projected, detail)
    }
}

/// The full fusion block.
#[derive(Clone, Debug)]
pub struct DenseFusion {
    pub cfg: DfbConfig,
    compress_hr: Conv,
    compress_lr: Conv,
    pub context: ContextBuilder,
    pub smooth: SmoothUpsampler,
    pub detail: DetailRestorer,
    pub reassemble_smooth: Carafe,
    pub reassemble_detail: Carafe,
    out_smooth: Conv,
    out_detail: Conv,
}

impl DenseFusion {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        hr_channels: usize,
        lr_channels: usize,
        out_channels: usize,
        cfg: &DfbConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let cc = cfg.compressed_channels;
        Ok(Self {
            cfg: cfg.clone(),
            compress_hr: Conv::pointwise(b, "compress_hr", hr_channels, cc)?,
            compress_lr: Conv::pointwise(b, "compress_lr", lr_channels, cc)?,
            context: ContextBuilder::new(b, cc)?,
            smooth: b.scope("smooth", |b| {
                SmoothUpsampler::new(b, cc, cfg.k_smooth, cfg.hamming)
            })?,
            detail: b.scope("detail", |b| {
                DetailRestorer::new(b, hr_channels, cc, cfg.k_detail, cfg.hamming)
            })?,
            reassemble_smooth: b.scope("reassemble_smooth", |b| Carafe::new(b, cc, cfg.k_up))?,
            reassemble_detail: b.scope("reassemble_detail", |b| Carafe::new(b, cc, cfg.k_up))?,
            out_smooth: Conv::pointwise(b, "out_smooth", lr_channels, out_channels)?,
            out_detail: Conv::pointwise(b, "out_detail", hr_channels, out_channels)?,
        })
    }

    /// Compressed `(hr_c, lr_c)`.
    pub fn compress<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        hr: Var,
        lr: Var,
    ) -> Result<(Var, Var)> {
        Ok((
            self.compress_hr.forward(g, hr)?,
            self.compress_lr.forward(g, lr)?,
        ))
    }

    /// The two refined streams before projection: `(smooth, detail)`.
    pub fn streams<T: Scalar>(&self, g: &mut Graph<'_, T>, hr: Var, lr: Var) -> Result<(Var, Var)> {
        check_pair(g, hr, lr)?;
        let (hr_c, lr_c) = self.compress(g, hr, lr)?;
        let (z_lr, z_hr) = self.context.forward(g, hr_c, lr_c)?;
        let smooth = self.smooth.forward(g, lr, z_lr)?;
        assert_eq!(
            g.value(smooth).dims()[1..],
            g.value(hr).dims()[1..],
            "upsampled stream must match the skip resolution"
        );
        let detail = self.detail.forward(g, hr, z_hr)?;
        let smooth = self.reassemble_smooth.forward(g, smooth, z_hr)?;
        let detail = self.reassemble_detail.forward(g, detail, z_hr)?;
        Ok((smooth, detail))
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, hr: Var, lr: Var) -> Result<Var> {
        let (smooth, detail) = self.streams(g, hr, lr)?;
        let a = self.out_smooth.forward(g, smooth)?;
        let b = self.out_detail.forward(g, detail)?;
        ops::add(g, a, b)
    }
}

/// Plain fusion used when the dense block is ablated: nearest-upsampled,
/// projected `lr` plus projected `hr`.
#[derive(Clone, Debug)]
pub struct PlainFusion {
    lr_proj: Conv,
    hr_proj: Conv,
}

impl PlainFusion {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        hr_channels: usize,
        lr_channels: usize,
        out_channels: usize,
    ) -> Result<Self> {
        Ok(Self {
            lr_proj: Conv::pointwise(b, "lr_proj", lr_channels, out_channels)?,
            hr_proj: Conv::pointwise(b, "hr_proj", hr_channels, out_channels)?,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, hr: Var, lr: Var) -> Result<Var> {
        check_pair(g, hr, lr)?;
        let l = self.lr_proj.forward(g, lr)?;
        let l = ops::upsample_nearest2(g, l)?;
        let h = self.hr_proj.forward(g, hr)?;
        ops::add(g, l, h)
    }
}

/// Either fusion behind one interface.
#[derive(Clone, Debug)]
pub enum Fusion {
    Dense(Box<DenseFusion>),
    Plain(PlainFusion),
}

impl Fusion {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        hr_channels: usize,
        lr_channels: usize,
        out_channels: usize,
        cfg: Option<&DfbConfig>,
    ) -> Result<Self> {
        Ok(match cfg {
            Some(cfg) => Fusion::Dense(Box::new(DenseFusion::new(
                b,
                hr_channels,
                lr_channels,
                out_channels,
                cfg,
            )?)),
            None => Fusion::Plain(PlainFusion::new(b, hr_channels, lr_channels, out_channels)?),
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, hr: Var, lr: Var) -> Result<Var> {
        match self {
            Fusion::Dense(d) => d.forward(g, hr, lr),
            Fusion::Plain(p) => p.forward(g, hr, lr),
        }
    }
}
