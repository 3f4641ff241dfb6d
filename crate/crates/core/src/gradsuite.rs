//! Named finite-difference suites for every differentiable component.
//!
//! Each suite builds its module in `f64`, registers random inputs as
//! parameters, and checks a random linear projection of the output.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    window_attention, BlockMode, Modulation, SimConfig, StagePriors, TransformerBlock, WindowLayout,
};
use crate::autograd::{Graph, Var};
use crate::dfb::{
    ContextBuilder, DenseFusion, DetailRestorer, DfbConfig, PlainFusion, SmoothUpsampler,
};
use crate::error::{config_err, Result};
use crate::geometry::intrinsics_from_fov;
use crate::gradcheck::{grad_check_params, GradCheckReport};
use crate::kernel_ops::{
    apply_kernels_var, invert_to_highpass_var, normalize_kernels_var, pixel_shuffle_var, Carafe,
};
use crate::network::{DenseSr, ModelConfig, ScenePriors};
use crate::ops::{self, Padding};
use crate::param::{ParamBuilder, ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::train::charbonnier;

pub const SUITES: &[&str] = &[
    "conv",
    "conv_transpose",
    "activations",
    "elementwise",
    "channels",
    "resample",
    "layer_norm",
    "kernels",
    "pixel_shuffle",
    "carafe",
    "attention",
    "block",
    "context",
    "smooth",
    "detail",
    "dfb",
    "plain_fusion",
    "network",
    "charbonnier",
];

const STEP: f64 = 1e-5;
/// The full network's objective is large relative to individual
/// derivatives, so a wider step keeps rounding noise below the tolerance.
const NETWORK_STEP: f64 = 1e-4;
const COORDS_PER_TENSOR: usize = 12;

struct Bench {
    store: ParamStore<f64>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl Bench {
    fn new(seed: u64) -> Self {
        Self {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    fn input(&mut self, name: &str, dims: &[usize]) -> ParamId {
        let rng = &mut self.rng;
        let t = Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0));
        self.store.insert(name, t).expect("unique input name")
    }

    fn builder(&mut self, scope: &str) -> ParamBuilder<'_, f64> {
        let mut b = ParamBuilder::new(&mut self.store, self.seed ^ 0x5eed, 0.5);
        b.push(scope);
        b
    }

    /// Replaces zero-initialized values so every path carries gradient.
    fn jitter(&mut self, amplitude: f64) {
        let rng = &mut self.rng;
        for (_, p) in self.store.params_mut() {
            p.value
                .data_mut()
                .iter_mut()
                .for_each(|v| *v += rng.gen_range(-amplitude..amplitude));
        }
    }

    fn check(self, f: impl Fn(&mut Graph<'_, f64>) -> Result<Var>) -> Result<GradCheckReport> {
        self.check_with_step(STEP, f)
    }

    fn check_with_step(
        mut self,
        step: f64,
        f: impl Fn(&mut Graph<'_, f64>) -> Result<Var>,
    ) -> Result<GradCheckReport> {
        let probe_seed = self.rng.gen();
        let project = move |g: &mut Graph<'_, f64>| -> Result<Var> {
            let out = f(g)?;
            let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
            let dims = g.value(out).dims().to_vec();
            let w = Tensor::from_fn(&dims, |_| rng.gen_range(-1.0..1.0));
            ops::weighted_sum(g, out, w)
        };
        grad_check_params(&mut self.store, project, step, COORDS_PER_TENSOR, self.seed)
    }
}

fn stage_priors(h: usize, w: usize, d_sem: usize, rng: &mut ChaCha8Rng) -> Result<StagePriors> {
    let hw = h * w;
    let depth = Tensor::from_fn(&[1, h, w], |i| {
        2.0 + 0.1 * (i % w) as f32 + rng.gen_range(0.0..0.3)
    });
    let mut normals = Tensor::from_fn(&[3, h, w], |i| {
        if i < 2 * hw {
            rng.gen_range(-0.5..0.5)
        } else {
            1.0
        }
    });
    for p in 0..hw {
        let n: f32 = (0..3)
            .map(|c| {
                let v: f32 = normals[c * hw + p];
                v * v
            })
            .sum::<f32>()
            .sqrt();
        (0..3).for_each(|c| normals[c * hw + p] /= n);
    }
    let semantic = Tensor::from_fn(&[d_sem, h, w], |_| rng.gen_range(-1.0..1.0));
    Ok(StagePriors {
        depth,
        normals,
        semantic,
        intrinsics: intrinsics_from_fov(60.0, w, h)?,
    })
}

/// Runs one named suite and returns its worst relative error.
pub fn run_suite(name: &str, seed: u64) -> Result<GradCheckReport> {
    let mut b = Bench::new(seed);
    match name {
        "conv" => {
            let x = b.input("x", &[2, 5, 6]);
            let w = b.input("w", &[3, 2, 3, 3]);
            let bias = b.input("b", &[3]);
            let w2 = b.input("w2", &[2, 3, 4, 4]);
            b.check(move |g| {
                let (x, w, bias, w2) = (g.param(x), g.param(w), g.param(bias), g.param(w2));
                let y = ops::conv2d(g, x, w, Some(bias), 1, Padding::Reflect(1))?;
                let z = ops::conv2d(g, y, w2, None, 2, Padding::Zero(1))?;
                let y2 = ops::conv2d(g, x, w, None, 1, Padding::Zero(1))?;
                let y2 = ops::slice_channels(g, y2, 0, 2)?;
                let y2 = ops::crop(g, y2, 2, 3)?;
                ops::add(g, z, y2)
            })
        }
        "conv_transpose" => {
            let x = b.input("x", &[3, 3, 4]);
            let w = b.input("w", &[3, 2, 2, 2]);
            let bias = b.input("b", &[2]);
            b.check(move |g| {
                let (x, w, bias) = (g.param(x), g.param(w), g.param(bias));
                ops::conv_transpose2x2(g, x, w, Some(bias))
            })
        }
        "activations" => {
            let x = b.input("x", &[2, 4, 4]);
            b.check(move |g| {
                let x = g.param(x);
                let a = ops::leaky_relu(g, x, 0.01);
                let s = ops::gelu(g, x);
                ops::add(g, a, s)
            })
        }
        "elementwise" => {
            let x = b.input("x", &[2, 3, 3]);
            let y = b.input("y", &[2, 3, 3]);
            b.check(move |g| {
                let (x, y) = (g.param(x), g.param(y));
                let p = ops::mul(g, x, y)?;
                let d = ops::sub(g, p, y)?;
                Ok(ops::scale(g, d, 1.7))
            })
        }
        "channels" => {
            let x = b.input("x", &[3, 4, 4]);
            let y = b.input("y", &[2, 4, 4]);
            b.check(move |g| {
                let (x, y) = (g.param(x), g.param(y));
                let c = ops::concat_channels(g, &[x, y])?;
                ops::slice_channels(g, c, 1, 3)
            })
        }
        "resample" => {
            let x = b.input("x", &[2, 6, 8]);
            b.check(move |g| {
                let x = g.param(x);
                let p = ops::avg_pool2(g, x)?;
                let u = ops::upsample_nearest2(g, p)?;
                let m = ops::mul(g, u, x)?;
                ops::crop(g, m, 5, 7)
            })
        }
        "layer_norm" => {
            let x = b.input("x", &[4, 3, 3]);
            let gamma = b.input("gamma", &[4]);
            let beta = b.input("beta", &[4]);
            b.check(move |g| {
                let (x, gamma, beta) = (g.param(x), g.param(gamma), g.param(beta));
                ops::layer_norm_channels(g, x, gamma, beta, 1e-5)
            })
        }
        "kernels" => {
            let x = b.input("x", &[2, 5, 5]);
            let raw3 = b.input("raw3", &[2 * 9, 5, 5]);
            let raw5 = b.input("raw5", &[25, 5, 5]);
            b.check(move |g| {
                let (x, raw3, raw5) = (g.param(x), g.param(raw3), g.param(raw5));
                let low3 = normalize_kernels_var(g, raw3, 2, 3, true)?;
                let first = ops::slice_channels(g, low3, 0, 9)?;
                let high = invert_to_highpass_var(g, first, 3)?;
                let low5 = normalize_kernels_var(g, raw5, 1, 5, false)?;
                let a = apply_kernels_var(g, x, high, 3)?;
                let c = apply_kernels_var(g, x, low5, 5)?;
                let second = ops::slice_channels(g, low3, 9, 9)?;
                let d = apply_kernels_var(g, a, second, 3)?;
                ops::add(g, c, d)
            })
        }
        "pixel_shuffle" => {
            let parts: Vec<ParamId> = (0..4)
                .map(|i| b.input(&format!("g{i}"), &[2, 3, 2]))
                .collect();
            b.check(move |g| {
                let vars: Vec<Var> = parts.iter().map(|&p| g.param(p)).collect();
                pixel_shuffle_var(g, &vars)
            })
        }
        "carafe" => {
            let x = b.input("x", &[2, 5, 6]);
            let ctx = b.input("ctx", &[3, 5, 6]);
            let carafe = Carafe::new(&mut b.builder("carafe"), 3, 3)?;
            b.jitter(0.3);
            b.check(move |g| {
                let (x, ctx) = (g.param(x), g.param(ctx));
                carafe.forward(g, x, ctx)
            })
        }
        "attention" => {
            let qkv = b.input("qkv", &[12, 6, 6]);
            let layout = Rc::new(WindowLayout::new(6, 6, 4, 2)?);
            let priors = stage_priors(6, 6, 3, &mut b.rng)?;
            let sim = SimConfig::default();
            let m_mul: Rc<Vec<Vec<f64>>> = Rc::new(
                priors
                    .modulation(&layout, &sim)?
                    .expect("modulation enabled"),
            );
            let log_cfg = SimConfig {
                mode: Modulation::LogBias,
                ..sim
            };
            let m_log: Rc<Vec<Vec<f64>>> = Rc::new(
                priors
                    .modulation(&layout, &log_cfg)?
                    .expect("modulation enabled"),
            );
            let plain = Rc::new(WindowLayout::new(6, 6, 3, 0)?);
            b.check(move |g| {
                let qkv = g.param(qkv);
                let a = window_attention(
                    g,
                    qkv,
                    2,
                    layout.clone(),
                    Some(m_mul.clone()),
                    Modulation::Multiply,
                )?;
                let l = window_attention(
                    g,
                    qkv,
                    2,
                    layout.clone(),
                    Some(m_log.clone()),
                    Modulation::LogBias,
                )?;
                let s = window_attention(g, qkv, 1, plain.clone(), None, Modulation::Multiply)?;
                let al = ops::add(g, a, l)?;
                ops::add(g, al, s)
            })
        }
        "block" => {
            let x = b.input("x", &[4, 6, 6]);
            let priors = stage_priors(6, 6, 3, &mut b.rng)?;
            let sim_block =
                TransformerBlock::new(&mut b.builder("sim"), 4, 2, 4, 2, 2, BlockMode::Sim)?;
            let std_block =
                TransformerBlock::new(&mut b.builder("std"), 4, 2, 4, 0, 2, BlockMode::Standard)?;
            b.jitter(0.3);
            let sim = SimConfig::default();
            b.check(move |g| {
                let x = g.param(x);
                let y = sim_block.forward(g, x, Some(&priors), &sim)?;
                std_block.forward(g, y, None, &sim)
            })
        }
        "context" => {
            let hr = b.input("hr", &[3, 6, 6]);
            let lr = b.input("lr", &[3, 3, 3]);
            let ctx = ContextBuilder::new(&mut b.builder("ctx"), 3)?;
            b.jitter(0.3);
            b.check(move |g| {
                let (hr, lr) = (g.param(hr), g.param(lr));
                let (z_lr, z_hr) = ctx.forward(g, hr, lr)?;
                let up = ops::upsample_nearest2(g, z_lr)?;
                ops::add(g, up, z_hr)
            })
        }
        "smooth" => {
            let lr = b.input("lr", &[2, 4, 4]);
            let ctx = b.input("ctx", &[3, 4, 4]);
            let smooth = SmoothUpsampler::new(&mut b.builder("smooth"), 3, 3, true)?;
            b.jitter(0.3);
            b.check(move |g| {
                let (lr, ctx) = (g.param(lr), g.param(ctx));
                smooth.forward(g, lr, ctx)
            })
        }
        "detail" => {
            let hr = b.input("hr", &[2, 5, 5]);
            let ctx = b.input("ctx", &[3, 5, 5]);
            let detail = DetailRestorer::new(&mut b.builder("detail"), 2, 3, 3, false)?;
            b.jitter(0.3);
            b.check(move |g| {
                let (hr, ctx) = (g.param(hr), g.param(ctx));
                detail.forward(g, hr, ctx)
            })
        }
        "dfb" => {
            let hr = b.input("hr", &[3, 8, 8]);
            let lr = b.input("lr", &[4, 4, 4]);
            let cfg = DfbConfig {
                compressed_channels: 3,
                k_up: 3,
                hamming: true,
                ..DfbConfig::default()
            };
            let dfb = DenseFusion::new(&mut b.builder("dfb"), 3, 4, 3, &cfg)?;
            b.jitter(0.3);
            b.check(move |g| {
                let (hr, lr) = (g.param(hr), g.param(lr));
                dfb.forward(g, hr, lr)
            })
        }
        "plain_fusion" => {
            let hr = b.input("hr", &[3, 6, 6]);
            let lr = b.input("lr", &[4, 3, 3]);
            let fusion = PlainFusion::new(&mut b.builder("fusion"), 3, 4, 3)?;
            b.jitter(0.3);
            b.check(move |g| {
                let (hr, lr) = (g.param(hr), g.param(lr));
                fusion.forward(g, hr, lr)
            })
        }
        "network" => {
            let cfg = ModelConfig {
                base_dim: 4,
                window: 4,
                shift: 2,
                mlp_ratio: 2,
                dfb: DfbConfig {
                    compressed_channels: 4,
                    ..DfbConfig::default()
                },
                d_sem: 4,
                init_std: 0.1,
                seed,
                ..ModelConfig::default()
            };
            let model = DenseSr::new(&cfg, &mut b.store)?;
            b.jitter(0.05);
            let rng = &mut b.rng;
            let image = Tensor::from_fn(&[3, 16, 16], |_| rng.gen_range(0.0..1.0));
            let sp = stage_priors(16, 16, 4, rng)?;
            let priors = ScenePriors {
                depth: sp.depth,
                normals: sp.normals,
                semantic: sp.semantic,
            };
            b.check_with_step(NETWORK_STEP, move |g| {
                model.forward(g, &image, &priors, None)
            })
        }
        "charbonnier" => {
            let x = b.input("x", &[2, 4, 4]);
            let rng = &mut b.rng;
            let target = Tensor::from_fn(&[2, 4, 4], |_| rng.gen_range(-1.0..1.0));
            b.check(move |g| {
                let x = g.param(x);
                let l = charbonnier(g, x, &target, 1e-3)?;
                Ok(ops::scale(g, l, 1.0))
            })
        }
        other => Err(config_err!(
            "unknown gradient suite {other:?}; known: {}",
            SUITES.join(", ")
        )),
    }
}

/// Runs every suite and returns `(name, report)` pairs in `SUITES` order.
pub fn run_all(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    SUITES
        .iter()
        .map(|&n| Ok((n, run_suite(n, seed)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(run_suite("nope", 0).is_err());
    }

    #[test]
    fn small_suites_pass() {
        for name in ["conv", "kernels", "attention", "dfb"] {
            let r = run_suite(name, 1).unwrap();
            assert!(r.max_rel_error < 1e-3, "{name}: {r:?}");
        }
    }
}
