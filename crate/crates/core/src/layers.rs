//! Parameter-owning convolution layers.

use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::ops::{self, Padding};
use crate::param::{ParamBuilder, ParamId};
use crate::tensor::Scalar;

/// Convolution with a bias, weights `C_out×C_in×k×k`.
#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub pad: Padding,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: Padding,
    ) -> Result<Self> {
        b.scope(name, |b| {
            Ok(Self {
                weight: b.normal("weight", &[cout, cin, k, k])?,
                bias: b.zeros("bias", &[cout])?,
                stride,
                pad,
            })
        })
    }

    /// 1×1 convolution, i.e. a per-pixel linear map over channels.
    pub fn pointwise<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        name: &str,
        cin: usize,
        cout: usize,
    ) -> Result<Self> {
        Self::new(b, name, cin, cout, 1, 1, Padding::Zero(0))
    }

    /// Stride-1 `k×k` convolution with reflect padding.
    pub fn same<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
    ) -> Result<Self> {
        Self::new(b, name, cin, cout, k, 1, Padding::Reflect(k / 2))
    }

    /// Stride-1 `k×k` convolution whose weights start at zero.
    pub fn same_zeroed<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
    ) -> Result<Self> {
        b.scope(name, |b| {
            Ok(Self {
                weight: b.zeros("weight", &[cout, cin, k, k])?,
                bias: b.zeros("bias", &[cout])?,
                stride: 1,
                pad: Padding::Reflect(k / 2),
            })
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        ops::conv2d(g, x, w, Some(b), self.stride, self.pad)
    }
}

/// 2×2 stride-2 transposed convolution, weights `C_in×C_out×2×2`.
#[derive(Clone, Debug)]
pub struct UpConv {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl UpConv {
    pub fn new<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        name: &str,
        cin: usize,
        cout: usize,
    ) -> Result<Self> {
        b.scope(name, |b| {
            Ok(Self {
                weight: b.normal("weight", &[cin, cout, 2, 2])?,
                bias: b.zeros("bias", &[cout])?,
            })
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        ops::conv_transpose2x2(g, x, w, Some(b))
    }
}
