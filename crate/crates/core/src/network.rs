//! The full U-shaped restoration network.
//!
//! RGB (+ depth) is embedded by a 3×3 convolution, passed through three
//! encoder stages (transformer blocks, then a strided 4×4 convolution), a
//! bottleneck that injects multi-scale semantic features, and three decoder
//! stages that fuse the upsampled deep path with the encoder skip. A
//! zero-initialized 3×3 projection predicts a residual added to the input.

use crate::attention::{BlockMode, PriorStack, SimConfig, StagePriors, TransformerBlock};
use crate::autograd::{Graph, Var};
use crate::config::KeyValues;
use crate::dfb::{DfbConfig, Fusion};
use crate::error::{config_err, Result};
use crate::geometry::{intrinsics_from_fov, CameraIntrinsics, DEFAULT_FOV_DEGREES};
use crate::layers::{Conv, UpConv};
use crate::ops::{self, reflect_index, Padding};
use crate::param::{InitScale, ParamBuilder, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Channel multipliers of the seven stages relative to the base width.
pub const STAGE_MULTIPLIERS: [usize; 7] = [1, 2, 4, 8, 4, 2, 1];
/// Number of 2× downsamplings; inputs are padded to a multiple of `2^3`.
pub const LEVELS: usize = 3;
const LEAKY_SLOPE: f64 = 0.01;
const SEMANTIC_SCALES: [usize; 3] = [1, 2, 4];

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub base_dim: usize,
    pub heads: [usize; 7],
    pub blocks_per_stage: usize,
    pub window: usize,
    pub shift: usize,
    pub mlp_ratio: usize,
    /// `false` swaps the dense fusion block for plain upsample-and-add.
    pub use_dfb: bool,
    pub dfb: DfbConfig,
    /// `false` makes every block a standard block.
    pub use_sim: bool,
    pub sim: SimConfig,
    /// `false` feeds RGB only to the input projection.
    pub use_depth_input: bool,
    /// `false` zeroes the semantic features injected at the bottleneck.
    pub use_semantic_injection: bool,
    pub d_sem: usize,
    pub fov_degrees: f64,
    /// Standard deviation of normally drawn weights.
    pub init_std: f64,
    /// Draw weights with `1/sqrt(fan_in)` deviation instead of `init_std`.
    pub fan_in_init: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            base_dim: 32,
            heads: [1, 2, 4, 16, 8, 4, 2],
            blocks_per_stage: 2,
            window: 16,
            shift: 8,
            mlp_ratio: 4,
            use_dfb: true,
            dfb: DfbConfig::default(),
            use_sim: true,
            sim: SimConfig::default(),
            use_depth_input: true,
            use_semantic_injection: true,
            d_sem: 16,
            fov_degrees: DEFAULT_FOV_DEGREES,
            init_std: 0.2,
            fan_in_init: false,
            seed: 0,
        }
    }
}

fn parse_heads(s: &str) -> Result<[usize; 7]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| config_err!("bad head count {p:?}: {e}"))
        })
        .collect::<Result<_>>()?;
    v.try_into()
        .map_err(|v: Vec<usize>| config_err!("heads needs 7 entries, got {}", v.len()))
}

impl ModelConfig {
    /// Configuration at another base width with everything else default.
    pub fn with_width(base_dim: usize) -> Self {
        Self {
            base_dim,
            ..Self::default()
        }
    }

    pub fn stage_dims(&self) -> [usize; 7] {
        STAGE_MULTIPLIERS.map(|m| m * self.base_dim)
    }

    pub fn input_channels(&self) -> usize {
        if self.use_depth_input {
            4
        } else {
            3
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_dim == 0
            || self.blocks_per_stage == 0
            || self.mlp_ratio == 0
            || self.d_sem == 0
        {
            return Err(config_err!(
                "base_dim, blocks_per_stage, mlp_ratio and d_sem must be positive"
            ));
        }
        for (dim, heads) in self.stage_dims().into_iter().zip(self.heads) {
            if heads == 0 || dim % heads != 0 {
                return Err(config_err!(
                    "stage width {dim} is not divisible by {heads} heads"
                ));
            }
        }
        if self.window == 0 || self.shift >= self.window {
            return Err(config_err!(
                "shift {} must be smaller than window {}",
                self.shift,
                self.window
            ));
        }
        if !(self.sim.tau_geo > 0.0) {
            return Err(config_err!("tau_geo must be positive"));
        }
        if !(self.init_std > 0.0) {
            return Err(config_err!("init_std must be positive"));
        }
        self.dfb.validate()
    }

    /// Reads the keys this config owns from `kv`, keeping defaults for absent ones.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        kv.set(&mut self.base_dim, "base_dim")?;
        if let Some(s) = kv.take::<String>("heads")? {
            self.heads = parse_heads(&s)?;
        }
        kv.set(&mut self.blocks_per_stage, "blocks_per_stage")?;
        kv.set(&mut self.window, "window")?;
        kv.set(&mut self.shift, "shift")?;
        kv.set(&mut self.mlp_ratio, "mlp_ratio")?;
        kv.set(&mut self.use_dfb, "use_dfb")?;
        kv.set(&mut self.dfb.compressed_channels, "compressed_channels")?;
        kv.set(&mut self.dfb.k_smooth, "k_smooth")?;
        kv.set(&mut self.dfb.k_detail, "k_detail")?;
        kv.set(&mut self.dfb.k_up, "k_up")?;
        kv.set(&mut self.dfb.hamming, "hamming")?;
        kv.set(&mut self.use_sim, "use_sim")?;
        kv.set(&mut self.sim.mode, "modulation")?;
        kv.set(&mut self.sim.tau_geo, "tau_geo")?;
        kv.set(&mut self.sim.use_semantic, "use_semantic")?;
        kv.set(&mut self.sim.use_geometry, "use_geometry")?;
        kv.set(&mut self.use_depth_input, "use_depth_input")?;
        kv.set(&mut self.use_semantic_injection, "use_semantic_injection")?;
        kv.set(&mut self.d_sem, "d_sem")?;
        kv.set(&mut self.fov_degrees, "fov_degrees")?;
        kv.set(&mut self.init_std, "init_std")?;
        kv.set(&mut self.fan_in_init, "fan_in_init")?;
        kv.set(&mut self.seed, "model_seed")?;
        Ok(())
    }

    /// `key=value` lines readable by [`ModelConfig::apply`].
    pub fn to_kv(&self) -> String {
        let heads: Vec<String> = self.heads.iter().map(|h| h.to_string()).collect();
        let lines = [
            format!("base_dim={}", self.base_dim),
            format!("heads={}", heads.join(",")),
            format!("blocks_per_stage={}", self.blocks_per_stage),
            format!("window={}", self.window),
            format!("shift={}", self.shift),
            format!("mlp_ratio={}", self.mlp_ratio),
            format!("use_dfb={}", self.use_dfb),
            format!("compressed_channels={}", self.dfb.compressed_channels),
            format!("k_smooth={}", self.dfb.k_smooth),
            format!("k_detail={}", self.dfb.k_detail),
            format!("k_up={}", self.dfb.k_up),
            format!("hamming={}", self.dfb.hamming),
            format!("use_sim={}", self.use_sim),
            format!("modulation={}", self.sim.mode),
            format!("tau_geo={:?}", self.sim.tau_geo),
            format!("use_semantic={}", self.sim.use_semantic),
            format!("use_geometry={}", self.sim.use_geometry),
            format!("use_depth_input={}", self.use_depth_input),
            format!("use_semantic_injection={}", self.use_semantic_injection),
            format!("d_sem={}", self.d_sem),
            format!("fov_degrees={:?}", self.fov_degrees),
            format!("init_std={:?}", self.init_std),
            format!("fan_in_init={}", self.fan_in_init),
            format!("model_seed={}", self.seed),
        ];
        lines.join("\n") + "\n"
    }
}

/// Full-resolution priors: depth `1×H×W`, normals `3×H×W` (unit or zero),
/// semantic features `d_sem×H×W`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePriors {
    pub depth: Tensor<f32>,
    pub normals: Tensor<f32>,
    pub semantic: Tensor<f32>,
}

impl ScenePriors {
    /// Fronto-parallel plane at unit depth with identical semantic features
    /// everywhere: every modulation map is exactly 1.
    pub fn neutral(h: usize, w: usize, d_sem: usize) -> Self {
        let hw = h * w;
        Self {
            depth: Tensor::full(&[1, h, w], 1.0),
            normals: Tensor::from_fn(&[3, h, w], |i| if i / hw == 2 { 1.0 } else { 0.0 }),
            semantic: Tensor::full(&[d_sem, h, w], 1.0 / (d_sem as f32).sqrt()),
        }
    }

    pub fn hw(&self) -> (usize, usize) {
        (self.depth.dims()[1], self.depth.dims()[2])
    }

    pub fn validate(&self, d_sem: usize) -> Result<()> {
        let (h, w) = self.hw();
        let expect = |t: &Tensor<f32>, c: usize, what: &str| -> Result<()> {
            if t.dims() != [c, h, w] {
                return Err(config_err!(
                    "{what} prior must be {c}×{h}×{w}, got {:?}",
                    t.dims()
                ));
            }
            t.check_finite(what)
        };
        expect(&self.depth, 1, "depth")?;
        expect(&self.normals, 3, "normal")?;
        expect(&self.semantic, d_sem, "semantic")
    }

    fn padded(&self, hp: usize, wp: usize) -> Self {
        Self {
            depth: reflect_pad(&self.depth, hp, wp),
            normals: reflect_pad(&self.normals, hp, wp),
            semantic: reflect_pad(&self.semantic, hp, wp),
        }
    }
}

/// Extends a `C×H×W` map to `C×hp×wp` by mirroring at the bottom and right.
pub fn reflect_pad<T: Scalar>(t: &Tensor<T>, hp: usize, wp: usize) -> Tensor<T> {
    let (c, h, w) = t.chw().expect("reflect_pad takes C×H×W");
    if (hp, wp) == (h, w) {
        return t.clone();
    }
    let d = t.data();
    Tensor::from_fn(&[c, hp, wp], |i| {
        let (ci, r) = (i / (hp * wp), i % (hp * wp));
        let (y, x) = (
            reflect_index((r / wp) as isize, h),
            reflect_index((r % wp) as isize, w),
        );
        d[ci * h * w + y * w + x]
    })
}

fn renormalize_normals(n: &Tensor<f32>) -> Tensor<f32> {
    let (_, h, w) = n.chw().unwrap();
    let hw = h * w;
    let d = n.data();
    let mut out = vec![0.0f32; 3 * hw];
    for p in 0..hw {
        let v = [d[p] as f64, d[hw + p] as f64, d[2 * hw + p] as f64];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-6 {
            for c in 0..3 {
                out[c * hw + p] = (v[c] / norm) as f32;
            }
        }
    }
    Tensor::new(&[3, h, w], out).unwrap()
}

/// Intrinsics of a `2^level`-downsampled grid that shares the full-res camera.
fn scaled_intrinsics(
    full: &CameraIntrinsics,
    full_w: usize,
    w: usize,
    h: usize,
) -> CameraIntrinsics {
    CameraIntrinsics {
        fov_degrees: full.fov_degrees,
        f: full.f * w as f64 / full_w as f64,
        cx: (w as f64 - 1.0) / 2.0,
        cy: (h as f64 - 1.0) / 2.0,
    }
}

/// Area-averages priors down to `levels + 1` scales (full, /2, /4, ...).
/// Normals are averaged and then renormalized; degenerate averages become 0.
pub fn resample_priors(
    priors: &ScenePriors,
    fov_degrees: f64,
    levels: usize,
) -> Result<PriorStack> {
    let (h, w) = priors.hw();
    let full = intrinsics_from_fov(fov_degrees, w, h)?;
    let mut depth = priors.depth.clone();
    let mut normals_raw = priors.normals.clone();
    let mut semantic = priors.semantic.clone();
    let mut stages = Vec::with_capacity(levels + 1);
    for level in 0..=levels {
        if level > 0 {
            depth = ops::avg_pool2_forward(&depth)?;
            normals_raw = ops::avg_pool2_forward(&normals_raw)?;
            semantic = ops::avg_pool2_forward(&semantic)?;
        }
        let (_, lh, lw) = depth.chw()?;
        stages.push(StagePriors {
            depth: depth.clone(),
            normals: if level == 0 {
                normals_raw.clone()
            } else {
                renormalize_normals(&normals_raw)
            },
            semantic: semantic.clone(),
            intrinsics: scaled_intrinsics(&full, w, lw, lh),
        });
    }
    Ok(PriorStack { stages })
}

/// Replaces every pixel by the mean of its `s×s` block (partial blocks at the
/// far edges), i.e. pooling by `s` followed by nearest upsampling.
fn block_mean(t: &Tensor<f32>, s: usize) -> Tensor<f32> {
    let (c, h, w) = t.chw().unwrap();
    if s <= 1 {
        return t.clone();
    }
    let d = t.data();
    let mut out = vec![0.0f32; c * h * w];
    for ci in 0..c {
        let plane = &d[ci * h * w..(ci + 1) * h * w];
        for by in (0..h).step_by(s) {
            for bx in (0..w).step_by(s) {
                let (ey, ex) = ((by + s).min(h), (bx + s).min(w));
                let mut sum = 0.0f64;
                for y in by..ey {
                    for x in bx..ex {
                        sum += plane[y * w + x] as f64;
                    }
                }
                let mean = (sum / ((ey - by) * (ex - bx)) as f64) as f32;
                for y in by..ey {
                    for x in bx..ex {
                        out[ci * h * w + y * w + x] = mean;
                    }
                }
            }
        }
    }
    Tensor::new(&[c, h, w], out).unwrap()
}

/// Semantic features at the bottleneck pooled at several scales and stacked
/// along channels.
pub fn multiscale_semantic(bottleneck_semantic: &Tensor<f32>) -> Tensor<f32> {
    let (c, h, w) = bottleneck_semantic.chw().unwrap();
    let mut data = Vec::with_capacity(SEMANTIC_SCALES.len() * c * h * w);
    for s in SEMANTIC_SCALES {
        data.extend_from_slice(block_mean(bottleneck_semantic, s).data());
    }
    Tensor::new(&[SEMANTIC_SCALES.len() * c, h, w], data).unwrap()
}

/// Per-stage dims and, when capturing, the activation itself.
#[derive(Clone, Debug)]
pub struct StageRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub activation: Option<Tensor<f32>>,
}

/// Read-only record of a forward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardTrace {
    pub capture: bool,
    pub stages: Vec<StageRecord>,
}

impl ForwardTrace {
    pub fn capturing() -> Self {
        Self {
            capture: true,
            stages: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    fn record<T: Scalar>(&mut self, name: String, value: &Tensor<T>) {
        self.stages.push(StageRecord {
            name,
            dims: value.dims().to_vec(),
            activation: self.capture.then(|| value.cast()),
        });
    }
}

fn record<T: Scalar>(
    trace: &mut Option<&mut ForwardTrace>,
    g: &Graph<'_, T>,
    name: impl Into<String>,
    v: Var,
) {
    if let Some(t) = trace.as_deref_mut() {
        t.record(name.into(), g.value(v));
    }
}

#[derive(Clone, Debug)]
struct EncoderStage {
    blocks: Vec<TransformerBlock>,
    down: Conv,
}

#[derive(Clone, Debug)]
struct Bottleneck {
    semantic_proj: Conv,
    fuse: Conv,
    blocks: Vec<TransformerBlock>,
}

#[derive(Clone, Debug)]
struct DecoderStage {
    up: UpConv,
    fusion: Fusion,
    merge: Conv,
    blocks: Vec<TransformerBlock>,
}

/// Network topology; weights live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct DenseSr {
    pub cfg: ModelConfig,
    input_proj: Conv,
    encoders: Vec<EncoderStage>,
    bottleneck: Bottleneck,
    decoders: Vec<DecoderStage>,
    output_proj: Conv,
}

fn stage_blocks<T: Scalar>(
    b: &mut ParamBuilder<'_, T>,
    cfg: &ModelConfig,
    stage: usize,
    sim_from: usize,
) -> Result<Vec<TransformerBlock>> {
    let dim = cfg.stage_dims()[stage];
    (0..cfg.blocks_per_stage)
        .map(|i| {
            let mode = if cfg.use_sim && i >= sim_from {
                BlockMode::Sim
            } else {
                BlockMode::Standard
            };
            let shift = if i % 2 == 1 { cfg.shift } else { 0 };
            b.scope(format!("block{i}"), |b| {
                TransformerBlock::new(
                    b,
                    dim,
                    cfg.heads[stage],
                    cfg.window,
                    shift,
                    cfg.mlp_ratio,
                    mode,
                )
            })
        })
        .collect()
}

impl DenseSr {
    /// Registers all parameters in `store` (initialized from `cfg.seed`).
    pub fn new<T: Scalar>(cfg: &ModelConfig, store: &mut ParamStore<T>) -> Result<Self> {
        cfg.validate()?;
        let dims = cfg.stage_dims();
        let scale = if cfg.fan_in_init {
            InitScale::FanIn
        } else {
            InitScale::Fixed(cfg.init_std)
        };
        let mut b = ParamBuilder::with_scale(store, cfg.seed, scale);
        let b = &mut b;
        let input_proj = Conv::same(b, "input_proj", cfg.input_channels(), dims[0], 3)?;
        let mut encoders = Vec::new();
        for i in 0..LEVELS {
            encoders.push(b.scope(format!("enc{i}"), |b| {
                Ok(EncoderStage {
                    blocks: stage_blocks(b, cfg, i, cfg.blocks_per_stage - 1)?,
                    down: Conv::new(b, "down", dims[i], dims[i + 1], 4, 2, Padding::Zero(1))?,
                })
            })?);
        }
        let sem_channels = SEMANTIC_SCALES.len() * cfg.d_sem;
        let bottleneck = b.scope("bottleneck", |b| {
            Ok(Bottleneck {
                semantic_proj: Conv::pointwise(b, "semantic_proj", sem_channels, dims[LEVELS])?,
                fuse: b.scope("fuse", |b| {
                    Ok(Conv {
                        weight: b.zeros("weight", &[dims[LEVELS], 2 * dims[LEVELS], 1, 1])?,
                        bias: b.zeros("bias", &[dims[LEVELS]])?,
                        stride: 1,
                        pad: Padding::Zero(0),
                    })
                })?,
                blocks: stage_blocks(b, cfg, LEVELS, 0)?,
            })
        })?;
        let mut decoders = Vec::new();
        for j in 0..LEVELS {
            let (deep, out) = (dims[LEVELS + j], dims[LEVELS + j + 1]);
            let skip = dims[LEVELS - 1 - j];
            decoders.push(b.scope(format!("dec{j}"), |b| {
                Ok(DecoderStage {
                    up: UpConv::new(b, "up", deep, out)?,
                    fusion: b.scope(if cfg.use_dfb { "dfb" } else { "fusion" }, |b| {
                        Fusion::new(b, skip, deep, out, cfg.use_dfb.then_some(&cfg.dfb))
                    })?,
                    merge: Conv::pointwise(b, "merge", 2 * out, out)?,
                    blocks: {
                        let mut blocks = stage_blocks(b, cfg, LEVELS + j + 1, usize::MAX)?;
                        blocks
                            .iter_mut()
                            .for_each(|blk| blk.mode = BlockMode::Standard);
                        blocks
                    },
                })
            })?);
        }
        let output_proj = Conv::same_zeroed(b, "output_proj", dims[6], 3, 3)?;
        Ok(Self {
            cfg: cfg.clone(),
            input_proj,
            encoders,
            bottleneck,
            decoders,
            output_proj,
        })
    }

    /// Builds the model and a fresh `f32` parameter store.
    pub fn init(cfg: &ModelConfig) -> Result<(Self, ParamStore<f32>)> {
        let mut store = ParamStore::new();
        let model = Self::new(cfg, &mut store)?;
        Ok((model, store))
    }

    /// Predicts the shadow-free image for a `3×H×W` input. The result is not
    /// clamped.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        image: &Tensor<f32>,
        priors: &ScenePriors,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<Var> {
        let (c, h, w) = image.chw()?;
        if c != 3 {
            return Err(config_err!("input image must have 3 channels, got {c}"));
        }
        priors.validate(self.cfg.d_sem)?;
        if priors.hw() != (h, w) {
            return Err(config_err!(
                "priors are {:?}, image is {h}×{w}",
                priors.hw()
            ));
        }
        let m = 1 << LEVELS;
        let (hp, wp) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
        let padded = reflect_pad(image, hp, wp);
        let stack = resample_priors(&priors.padded(hp, wp), self.cfg.fov_degrees, LEVELS)?;

        let input = if self.cfg.use_depth_input {
            let mut d = padded.data().to_vec();
            d.extend_from_slice(stack.stages[0].depth.data());
            Tensor::new(&[4, hp, wp], d)?
        } else {
            padded
        };
        let x = g.constant(input.cast());
        let x = self.input_proj.forward(g, x)?;
        let mut x = ops::leaky_relu(g, x, LEAKY_SLOPE);
        record(&mut trace, g, "input", x);

        let sim = &self.cfg.sim;
        let mut skips = Vec::with_capacity(LEVELS);
        for (i, stage) in self.encoders.iter().enumerate() {
            for blk in &stage.blocks {
                x = blk.forward(g, x, Some(&stack.stages[i]), sim)?;
            }
            record(&mut trace, g, format!("enc{i}"), x);
            skips.push(x);
            x = stage.down.forward(g, x)?;
        }

        let bn = &self.bottleneck;
        let semantic = if self.cfg.use_semantic_injection {
            multiscale_semantic(&stack.stages[LEVELS].semantic)
        } else {
            let (_, bh, bw) = stack.stages[LEVELS].semantic.chw()?;
            Tensor::zeros(&[SEMANTIC_SCALES.len() * self.cfg.d_sem, bh, bw])
        };
        let s = g.constant(semantic.cast());
        let s = bn.semantic_proj.forward(g, s)?;
        let joined = ops::concat_channels(g, &[x, s])?;
        let injected = bn.fuse.forward(g, joined)?;
        x = ops::add(g, x, injected)?;
        for blk in &bn.blocks {
            x = blk.forward(g, x, Some(&stack.stages[LEVELS]), sim)?;
        }
        record(&mut trace, g, "bottleneck", x);

        for (j, stage) in self.decoders.iter().enumerate() {
            let skip = skips[LEVELS - 1 - j];
            let up = stage.up.forward(g, x)?;
            let fused = stage.fusion.forward(g, skip, x)?;
            let joined = ops::concat_channels(g, &[up, fused])?;
            x = stage.merge.forward(g, joined)?;
            for blk in &stage.blocks {
                x = blk.forward(g, x, None, sim)?;
            }
            record(&mut trace, g, format!("dec{j}"), x);
        }

        let residual = self.output_proj.forward(g, x)?;
        let residual = ops::crop(g, residual, h, w)?;
        let base = g.constant(image.cast());
        ops::add(g, base, residual)
    }

    /// Inference in `f32` without recording gradients of parameters.
    pub fn predict(
        &self,
        store: &ParamStore<f32>,
        image: &Tensor<f32>,
        priors: &ScenePriors,
        trace: Option<&mut ForwardTrace>,
    ) -> Result<Tensor<f32>> {
        let mut g = Graph::with_params(store);
        let out = self.forward(&mut g, image, priors, trace)?;
        Ok(g.value(out).clone())
    }

    /// Blocks in encoder, bottleneck, decoder order.
    pub fn blocks(&self) -> impl Iterator<Item = &TransformerBlock> {
        self.encoders
            .iter()
            .flat_map(|s| &s.blocks)
            .chain(&self.bottleneck.blocks)
            .chain(self.decoders.iter().flat_map(|s| &s.blocks))
    }
}

/// Clamps to `[0, 1]` for display and metrics.
pub fn clamp_unit(t: &Tensor<f32>) -> Tensor<f32> {
    t.map(|v| v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::Modulation;

    fn tiny() -> ModelConfig {
        ModelConfig {
            base_dim: 4,
            window: 4,
            shift: 2,
            mlp_ratio: 2,
            dfb: DfbConfig {
                compressed_channels: 4,
                ..DfbConfig::default()
            },
            d_sem: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn default_shape_chain() {
        assert_eq!(
            ModelConfig::default().stage_dims(),
            [32, 64, 128, 256, 128, 64, 32]
        );
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = tiny();
        cfg.sim.mode = Modulation::LogBias;
        cfg.use_dfb = false;
        let mut kv = KeyValues::parse(&cfg.to_kv(), "model").unwrap();
        let mut back = ModelConfig::default();
        back.apply(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_indivisible_heads() {
        let cfg = ModelConfig {
            base_dim: 5,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_priors_stay_constant() {
        let p = ScenePriors::neutral(16, 16, 4);
        let stack = resample_priors(&p, 60.0, 3).unwrap();
        let sizes: Vec<usize> = stack.stages.iter().map(|s| s.hw().0).collect();
        assert_eq!(sizes, vec![16, 8, 4, 2]);
        for s in &stack.stages {
            assert!(s.depth.data().iter().all(|&v| v == 1.0));
            assert!(s.semantic.data().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn odd_sizes_are_padded_and_cropped() {
        let cfg = tiny();
        let (model, store) = DenseSr::init(&cfg).unwrap();
        let img = Tensor::from_fn(&[3, 10, 13], |i| (i % 7) as f32 / 7.0);
        let out = model
            .predict(&store, &img, &ScenePriors::neutral(10, 13, 4), None)
            .unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn trace_records_every_stage() {
        let cfg = tiny();
        let (model, store) = DenseSr::init(&cfg).unwrap();
        let img = Tensor::full(&[3, 16, 16], 0.5);
        let mut trace = ForwardTrace::default();
        model
            .predict(
                &store,
                &img,
                &ScenePriors::neutral(16, 16, 4),
                Some(&mut trace),
            )
            .unwrap();
        let dims: Vec<(String, Vec<usize>)> = trace
            .stages
            .iter()
            .map(|s| (s.name.clone(), s.dims.clone()))
            .collect();
        assert_eq!(dims[0], ("input".into(), vec![4, 16, 16]));
        assert_eq!(dims[3], ("enc2".into(), vec![16, 4, 4]));
        assert_eq!(dims[4], ("bottleneck".into(), vec![32, 2, 2]));
        assert_eq!(dims[7], ("dec2".into(), vec![4, 16, 16]));
        assert!(trace.stages.iter().all(|s| s.activation.is_none()));
    }
}
