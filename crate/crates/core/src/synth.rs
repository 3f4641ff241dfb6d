//! Procedural shadow scenes.
//!
//! A shadow-free image (gradient background plus textured shapes) is
//! multiplied by an illumination field `A ∈ [a_min, 1]` obtained by
//! blurring a random occluder mask. Depth comes from a tilted ground plane
//! with every shape on its own plane in front of it; normals are derived
//! from the depth, and semantic features are one random unit vector per
//! shape label.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{
    backproject, hwc_to_chw, intrinsics_from_fov, normals_from_points, CameraIntrinsics,
    DEFAULT_FOV_DEGREES,
};
use crate::network::ScenePriors;
use crate::tensor::Tensor;

const STREAM_IMAGE: u64 = 1;
const STREAM_SHADOW: u64 = 2;
const STREAM_PRIORS: u64 = 3;
const MIN_SIDE: usize = 32;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of sample `index` in a dataset generated from `seed`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64)
        .rotate_left(17)
        ^ 0xD1B5_4A32_D192_ED03
}

/// A filled convex region in pixel coordinates.
#[derive(Clone, Debug)]
enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        angle: f64,
    },
    Polygon {
        vertices: Vec<(f64, f64)>,
    },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, h: usize, w: usize, scale: (f64, f64)) -> Self {
        let side = h.min(w) as f64;
        let cx = rng.gen_range(0.1..0.9) * w as f64;
        let cy = rng.gen_range(0.1..0.9) * h as f64;
        let r = rng.gen_range(scale.0..scale.1) * side;
        if rng.gen_bool(0.5) {
            Shape::Ellipse {
                cx,
                cy,
                rx: r,
                ry: r * rng.gen_range(0.4..1.0),
                angle: rng.gen_range(0.0..std::f64::consts::PI),
            }
        } else {
            let n = rng.gen_range(3..=6);
            let mut angles: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            angles.sort_by(f64::total_cmp);
            let vertices = angles
                .into_iter()
                .map(|a| (cx + r * a.cos(), cy + r * a.sin()))
                .collect();
            Shape::Polygon { vertices }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Ellipse {
                cx,
                cy,
                rx,
                ry,
                angle,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let (s, c) = angle.sin_cos();
                let u = (dx * c + dy * s) / rx;
                let v = (-dx * s + dy * c) / ry;
                u * u + v * v <= 1.0
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let (x0, y0) = vertices[i];
                    let (x1, y1) = vertices[(i + 1) % n];
                    (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0.0
                })
            }
        }
    }
}

fn check_size(h: usize, w: usize) -> Result<()> {
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(Error::Domain(format!(
            "scenes must be at least {MIN_SIDE}×{MIN_SIDE}, got {h}×{w}"
        )));
    }
    Ok(())
}

/// Pixel-centre centroid of every label up to the largest one present;
/// labels without pixels get the image centre.
fn label_centroids(labels: &[u32], h: usize, w: usize) -> Vec<(f64, f64)> {
    let n = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut acc = vec![(0.0f64, 0.0f64, 0usize); n];
    for (p, &l) in labels.iter().enumerate() {
        let a = &mut acc[l as usize];
        a.0 += (p % w) as f64;
        a.1 += (p / w) as f64;
        a.2 += 1;
    }
    acc.into_iter()
        .map(|(sx, sy, c)| {
            if c == 0 {
                ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
            } else {
                (sx / c as f64, sy / c as f64)
            }
        })
        .collect()
}

/// Shadow-free image (`3×H×W` in `[0, 1]`) and its label map: 0 is the
/// background, `1..` the shapes in paint order.
pub fn gen_shadow_free(seed: u64, h: usize, w: usize) -> Result<(Tensor<f32>, Vec<u32>)> {
    check_size(h, w)?;
    let mut rng = rng_for(seed, STREAM_IMAGE);
    let hw = h * w;
    let c0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.3..0.95));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.3..0.95));
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (st, ct) = theta.sin_cos();
    let span = (w as f64 * ct.abs() + h as f64 * st.abs()).max(1.0);
    let mut img = vec![0.0f64; 3 * hw];
    for y in 0..h {
        for x in 0..w {
            let t =
                ((x as f64 - w as f64 / 2.0) * ct + (y as f64 - h as f64 / 2.0) * st) / span + 0.5;
            for c in 0..3 {
                img[c * hw + y * w + x] = c0[c] + (c1[c] - c0[c]) * t;
            }
        }
    }
    let mut labels = vec![0u32; hw];
    let n_shapes = rng.gen_range(3..=8);
    for k in 0..n_shapes {
        let shape = Shape::random(&mut rng, h, w, (0.1, 0.3));
        let color: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.15..0.95));
        let freq = rng.gen_range(0.15..0.6);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let amp = rng.gen_range(0.03..0.12);
        let checker = rng.gen_bool(0.3);
        let (sp, cp) = phi.sin_cos();
        for y in 0..h {
            for x in 0..w {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                if !shape.contains(fx, fy) {
                    continue;
                }
                let tex = if checker {
                    let cell = (2.0f64 / freq).round().max(2.0) as usize;
                    if (x / cell + y / cell) % 2 == 0 {
                        amp
                    } else {
                        -amp
                    }
                } else {
                    amp * (freq * (fx * cp + fy * sp)).sin()
                };
                let p = y * w + x;
                labels[p] = k as u32 + 1;
                for c in 0..3 {
                    img[c * hw + p] = color[c] * (1.0 + tex);
                }
            }
        }
    }
    let img = Tensor::new(
        &[3, h, w],
        img.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
    )?;
    Ok((img, labels))
}

/// Smallest share of the image an occluder mask must cover.
const MIN_SHADOW_COVERAGE: f64 = 0.02;

/// Random occluder mask (1 inside the cast shadow). Draws are repeated
/// until the mask covers at least 2% of the image.
pub fn occluder_mask(seed: u64, h: usize, w: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, STREAM_SHADOW);
    loop {
        let shapes: Vec<Shape> = (0..rng.gen_range(1..=3))
            .map(|_| Shape::random(&mut rng, h, w, (0.15, 0.4)))
            .collect();
        let mask: Vec<f64> = (0..h * w)
            .map(|p| {
                let (x, y) = ((p % w) as f64 + 0.5, (p / w) as f64 + 0.5);
                if shapes.iter().any(|s| s.contains(x, y)) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        if mask.iter().sum::<f64>() >= MIN_SHADOW_COVERAGE * (h * w) as f64 {
            return mask;
        }
    }
}

/// Separable Gaussian blur with standard deviation `sigma` and replicated
/// borders. `sigma = 0` returns the input.
pub fn gaussian_blur(data: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * data[y * w + clamp(x as isize + j as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[clamp(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// `A = 1 − (1 − a_min) · blur(mask, softness)`, as a `1×H×W` tensor.
pub fn illumination_from_mask(
    mask: &[f64],
    h: usize,
    w: usize,
    a_min: f64,
    softness: f64,
) -> Result<Tensor<f32>> {
    if !(a_min > 0.0 && a_min < 1.0) {
        return Err(Error::Domain(format!(
            "a_min must lie in (0, 1), got {a_min}"
        )));
    }
    if !(softness >= 0.0) {
        return Err(Error::Domain(format!(
            "softness must be non-negative, got {softness}"
        )));
    }
    let blurred = gaussian_blur(mask, h, w, softness);
    Tensor::new(
        &[1, h, w],
        blurred
            .into_iter()
            .map(|m| (1.0 - (1.0 - a_min) * m.clamp(0.0, 1.0)) as f32)
            .collect(),
    )
}

pub fn gen_illumination_field(
    seed: u64,
    h: usize,
    w: usize,
    a_min: f64,
    softness: f64,
) -> Result<Tensor<f32>> {
    check_size(h, w)?;
    illumination_from_mask(&occluder_mask(seed, h, w), h, w, a_min, softness)
}

/// Per-channel product `I_f · A`.
pub fn compose_shadowed(
    shadow_free: &Tensor<f32>,
    illumination: &Tensor<f32>,
) -> Result<Tensor<f32>> {
    let (c, h, w) = shadow_free.chw()?;
    if illumination.dims() != [1, h, w] {
        return Err(crate::error::config_err!(
            "illumination must be 1×{h}×{w}, got {:?}",
            illumination.dims()
        ));
    }
    let a = illumination.data();
    let hw = h * w;
    Ok(Tensor::from_fn(&[c, h, w], |i| shadow_free[i] * a[i % hw]))
}

/// Depth, normals and semantic features consistent with a label map.
pub fn synth_priors(
    labels: &[u32],
    h: usize,
    w: usize,
    seed: u64,
    d_sem: usize,
    intr: &CameraIntrinsics,
) -> Result<ScenePriors> {
    if labels.len() != h * w {
        return Err(crate::error::config_err!(
            "label map has {} entries for {h}×{w}",
            labels.len()
        ));
    }
    let centres = label_centroids(labels, h, w);
    let mut rng = rng_for(seed, STREAM_PRIORS);
    let ray = |x: f64, y: f64| [(x - intr.cx) / intr.f, (y - intr.cy) / intr.f, 1.0];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    // Ground: n·P = d with the bottom of the frame closest to the camera.
    let tilt: f64 = rng.gen_range(0.35..0.6);
    let ground_n = [0.0, tilt.sin(), tilt.cos()];
    let ground_d = rng.gen_range(2.5..4.0);
    let mut planes = vec![(ground_n, ground_d)];
    for &(cx, cy) in &centres[1..] {
        let a: f64 = rng.gen_range(-0.35..0.35);
        let b: f64 = rng.gen_range(-0.35..0.35);
        let norm = (a * a + b * b + 1.0).sqrt();
        let n = [a / norm, b / norm, 1.0 / norm];
        let r = ray(cx, cy);
        let z_ground = ground_d / dot(ground_n, r);
        let z = z_ground * rng.gen_range(0.55..0.9);
        let p = [r[0] * z, r[1] * z, z];
        planes.push((n, dot(n, p)));
    }
    let mut depth = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (n, d) = planes[labels[y * w + x] as usize];
            depth.push((d / dot(n, ray(x as f64, y as f64))) as f32);
        }
    }
    let depth = Tensor::new(&[h, w], depth)?;
    let normals = normals_from_points(&backproject(&depth, intr)?)?;
    let features: Vec<Vec<f32>> = (0..planes.len())
        .map(|_| {
            let v: Vec<f64> = (0..d_sem)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| (x / norm) as f32).collect()
        })
        .collect();
    let hw = h * w;
    let semantic = Tensor::from_fn(&[d_sem, h, w], |i| {
        features[labels[i % hw] as usize][i / hw]
    });
    Ok(ScenePriors {
        depth: depth.reshape(&[1, h, w])?,
        normals: hwc_to_chw(&normals.normals)?,
        semantic,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub height: usize,
    pub width: usize,
    pub a_min: f64,
    /// Fixed blur, or `None` to draw it uniformly from `[0, max_softness]`.
    pub softness: Option<f64>,
    pub max_softness: f64,
    pub d_sem: usize,
    pub fov_degrees: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            a_min: 0.3,
            softness: None,
            max_softness: 6.0,
            d_sem: 16,
            fov_degrees: DEFAULT_FOV_DEGREES,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub seed: u64,
    pub softness: f64,
    pub shadow_free: Tensor<f32>,
    pub illumination: Tensor<f32>,
    pub shadowed: Tensor<f32>,
    pub labels: Vec<u32>,
    pub priors: ScenePriors,
}

pub fn gen_scene(seed: u64, p: &SceneParams) -> Result<Scene> {
    let (h, w) = (p.height, p.width);
    let (shadow_free, labels) = gen_shadow_free(seed, h, w)?;
    let softness = match p.softness {
        Some(s) => s,
        None => rng_for(seed, STREAM_SHADOW + 100).gen_range(0.0..=p.max_softness),
    };
    let illumination = gen_illumination_field(seed, h, w, p.a_min, softness)?;
    let shadowed = compose_shadowed(&shadow_free, &illumination)?;
    let intr = intrinsics_from_fov(p.fov_degrees, w, h)?;
    let priors = synth_priors(&labels, h, w, seed, p.d_sem, &intr)?;
    Ok(Scene {
        seed,
        softness,
        shadow_free,
        illumination,
        shadowed,
        labels,
        priors,
    })
}

/// Sum of absolute horizontal and vertical differences.
pub fn total_variation(data: &[f32], h: usize, w: usize) -> f64 {
    let mut tv = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let v = data[y * w + x] as f64;
            if x + 1 < w {
                tv += (data[y * w + x + 1] as f64 - v).abs();
            }
            if y + 1 < h {
                tv += (data[(y + 1) * w + x] as f64 - v).abs();
            }
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let (a, la) = gen_shadow_free(7, 40, 48).unwrap();
        let (b, lb) = gen_shadow_free(7, 40, 48).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(la.len(), 40 * 48);
        assert!(la.iter().any(|&l| l > 0));
        assert!(gen_shadow_free(7, 16, 48).is_err());
    }

    #[test]
    fn every_scene_is_shadowed() {
        for seed in 0..300 {
            let covered = occluder_mask(seed, 64, 64).iter().sum::<f64>();
            assert!(
                covered >= 0.02 * 4096.0,
                "seed {seed} covers {covered} pixels"
            );
        }
    }

    #[test]
    fn illumination_cases() {
        let (h, w) = (32, 32);
        let a = illumination_from_mask(&vec![0.0; h * w], h, w, 0.3, 4.0).unwrap();
        assert!(a.data().iter().all(|&v| v == 1.0));
        let a = illumination_from_mask(&vec![1.0; h * w], h, w, 0.5, 0.0).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.5));
        assert!(illumination_from_mask(&vec![0.0; h * w], h, w, 1.0, 0.0).is_err());
    }

    #[test]
    fn softness_reduces_total_variation() {
        let tv: Vec<f64> = [0.0, 2.0, 8.0]
            .iter()
            .map(|&s| {
                let a = gen_illumination_field(11, 64, 64, 0.3, s).unwrap();
                total_variation(a.data(), 64, 64)
            })
            .collect();
        assert!(tv[0] > tv[1] && tv[1] > tv[2], "{tv:?}");
    }

    #[test]
    fn composition() {
        let f = Tensor::full(&[3, 2, 2], 0.8f32);
        let a = Tensor::full(&[1, 2, 2], 0.5f32);
        assert!(compose_shadowed(&f, &a)
            .unwrap()
            .data()
            .iter()
            .all(|&v| (v - 0.4).abs() < 1e-7));
        assert_eq!(
            compose_shadowed(&f, &Tensor::full(&[1, 2, 2], 1.0)).unwrap(),
            f
        );
    }

    #[test]
    fn priors_follow_labels() {
        let s = gen_scene(5, &SceneParams::default()).unwrap();
        let (h, w) = (64, 64);
        let hw = h * w;
        let sem = s.priors.semantic.data();
        let feat = |p: usize| (0..16).map(|c| sem[c * hw + p]).collect::<Vec<f32>>();
        for p in 0..hw {
            let n: f64 = feat(p)
                .iter()
                .map(|&v| (v as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        let bg: Vec<usize> = (0..hw).filter(|&p| s.labels[p] == 0).collect();
        let same = bg.iter().all(|&p| feat(p) == feat(bg[0]));
        assert!(same);
        assert!(s
            .priors
            .depth
            .data()
            .iter()
            .all(|&z| z > 0.0 && z.is_finite()));
        assert!(s
            .shadowed
            .data()
            .iter()
            .zip(s.shadow_free.data())
            .all(|(a, b)| a <= b));
    }

    #[test]
    fn flat_background_has_constant_normals() {
        let s = gen_scene(9, &SceneParams::default()).unwrap();
        let (h, w) = (64usize, 64usize);
        let hw = h * w;
        let n = s.priors.normals.data();
        // Interior background pixels whose 3×3 neighbourhood is background.
        let interior: Vec<usize> = (1..h - 1)
            .flat_map(|y| (1..w - 1).map(move |x| y * w + x))
            .filter(|&p| (0..9).all(|t| s.labels[p + (t / 3) * w + t % 3 - w - 1] == 0))
            .collect();
        assert!(!interior.is_empty());
        let r = interior[0];
        for &p in &interior {
            for c in 0..3 {
                assert!((n[c * hw + p] - n[c * hw + r]).abs() < 1e-3);
            }
        }
    }
}
