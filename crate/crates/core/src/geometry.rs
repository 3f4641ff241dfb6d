//! Pinhole camera intrinsics, depth backprojection, and surface normals.
//!
//! Point and normal maps are `H×W×3` tensors. Arithmetic runs in `f64`
//! and results are stored as `f32`.

use crate::error::{config_err, Error, Result};
use crate::tensor::Tensor;

/// Field of view used when no calibration is available.
pub const DEFAULT_FOV_DEGREES: f64 = 60.0;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fov_degrees: f64,
    /// Focal length in pixels.
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

/// `f = W / (2 tan(fov/2))`, principal point at the pixel-grid centre.
pub fn intrinsics_from_fov(
    fov_degrees: f64,
    width: usize,
    height: usize,
) -> Result<CameraIntrinsics> {
    if !(fov_degrees > 0.0 && fov_degrees < 180.0) {
        return Err(Error::Domain(format!(
            "field of view must lie in (0, 180) degrees, got {fov_degrees}"
        )));
    }
    if width < 2 || height < 2 {
        return Err(Error::Domain(format!(
            "image must be at least 2×2, got {width}×{height}"
        )));
    }
    let half = fov_degrees.to_radians() / 2.0;
    Ok(CameraIntrinsics {
        fov_degrees,
        f: width as f64 / (2.0 * half.tan()),
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
    })
}

impl CameraIntrinsics {
    /// Camera-space point for pixel `(x, y)` at depth `z`.
    #[inline]
    pub fn unproject(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        [(x - self.cx) * z / self.f, (y - self.cy) * z / self.f, z]
    }
}

/// `H×W×3` camera-space coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMap(pub Tensor<f32>);

/// `H×W×3` unit (or zero) normals plus a per-pixel validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    pub normals: Tensor<f32>,
    pub valid: Vec<bool>,
}

fn hw(depth: &Tensor<f32>) -> Result<(usize, usize)> {
    match *depth.dims() {
        [h, w] => Ok((h, w)),
        [1, h, w] => Ok((h, w)),
        _ => Err(config_err!("depth map must be H×W, got {:?}", depth.dims())),
    }
}

pub fn backproject(depth: &Tensor<f32>, intr: &CameraIntrinsics) -> Result<PointMap> {
    let (h, w) = hw(depth)?;
    let mut out = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let z = depth[y * w + x];
            if !(z >= 0.0 && z.is_finite()) {
                return Err(Error::Domain(format!(
                    "depth must be finite and non-negative, got {z} at ({x}, {y})"
                )));
            }
            let p = intr.unproject(x as f64, y as f64, z as f64);
            out.push(p[0] as f32);
            out.push(p[1] as f32);
            out.push(z);
        }
    }
    Ok(PointMap(Tensor::new(&[h, w, 3], out)?))
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Normals from the cross product of image-axis tangents: central
/// differences inside, one-sided at the borders. Normals face the camera
/// (`z ≥ 0`); pixels whose tangents are degenerate get a zero vector and
/// `valid = false`.
pub fn normals_from_points(points: &PointMap) -> Result<NormalMap> {
    let [h, w, 3] = *points.0.dims() else {
        return Err(config_err!(
            "point map must be H×W×3, got {:?}",
            points.0.dims()
        ));
    };
    if h < 3 || w < 3 {
        return Err(config_err!(
            "normal estimation needs at least 3×3 pixels, got {h}×{w}"
        ));
    }
    let d = points.0.data();
    let p = |y: usize, x: usize| -> [f64; 3] {
        let i = (y * w + x) * 3;
        [d[i] as f64, d[i + 1] as f64, d[i + 2] as f64]
    };
    let mut normals = Vec::with_capacity(h * w * 3);
    let mut valid = Vec::with_capacity(h * w);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let tx = sub3(p(y, x1), p(y, x0));
            let ty = sub3(p(y1, x), p(y0, x));
            let mut n = cross(tx, ty);
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if norm > 1e-12 && norm.is_finite() {
                let s = if n[2] < 0.0 { -1.0 } else { 1.0 } / norm;
                n = [n[0] * s, n[1] * s, n[2] * s];
                valid.push(true);
            } else {
                n = [0.0; 3];
                valid.push(false);
            }
            normals.extend(n.iter().map(|&v| v as f32));
        }
    }
    Ok(NormalMap {
        normals: Tensor::new(&[h, w, 3], normals)?,
        valid,
    })
}

/// Maps stored normals from `[0, 1]` to unit vectors: `n = 2 raw - 1`,
/// divided by `‖n‖ + 1e-20`.
pub fn normalize_normal_map(raw: &Tensor<f32>) -> Result<NormalMap> {
    let [h, w, 3] = *raw.dims() else {
        return Err(config_err!(
            "normal map must be H×W×3, got {:?}",
            raw.dims()
        ));
    };
    let mut out = Vec::with_capacity(h * w * 3);
    let mut valid = Vec::with_capacity(h * w);
    for px in raw.data().chunks_exact(3) {
        let n: Vec<f64> = px.iter().map(|&v| v as f64 * 2.0 - 1.0).collect();
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        valid.push(norm > 1e-6);
        out.extend(n.iter().map(|&v| (v / (norm + 1e-20)) as f32));
    }
    Ok(NormalMap {
        normals: Tensor::new(&[h, w, 3], out)?,
        valid,
    })
}

/// `H×W×C` to `C×H×W`.
pub fn hwc_to_chw(t: &Tensor<f32>) -> Result<Tensor<f32>> {
    let [h, w, c] = *t.dims() else {
        return Err(config_err!("expected H×W×C, got {:?}", t.dims()));
    };
    let d = t.data();
    Ok(Tensor::from_fn(&[c, h, w], |i| {
        let (ci, r) = (i / (h * w), i % (h * w));
        d[r * c + ci]
    }))
}

/// `C×H×W` to `H×W×C`.
pub fn chw_to_hwc(t: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (c, h, w) = t.chw()?;
    let d = t.data();
    Ok(Tensor::from_fn(&[h, w, c], |i| {
        let (r, ci) = (i / c, i % c);
        d[ci * h * w + r]
    }))
}
