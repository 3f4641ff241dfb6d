//! Objective, optimizer, schedule, augmentation and the training loop.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, Var};
use crate::checkpoint;
use crate::config::KeyValues;
use crate::dataset::Sample;
use crate::error::{config_err, Error, Result};
use crate::metrics::{psnr, ssim};
use crate::network::{clamp_unit, DenseSr, ModelConfig, ScenePriors};
use crate::param::ParamStore;
use crate::tensor::{Scalar, Tensor};

// ---------------------------------------------------------------- objective

/// Mean over elements of `sqrt((pred − target)² + eps²)`.
pub fn charbonnier_loss(pred: &Tensor<f32>, target: &Tensor<f32>, eps: f64) -> Result<f64> {
    pred.expect_same_dims(target)?;
    let e2 = eps * eps;
    let n = pred.len().max(1) as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| ((a as f64 - b as f64).powi(2) + e2).sqrt())
        .sum::<f64>()
        / n)
}

/// Differentiable Charbonnier loss against a constant target.
pub fn charbonnier<T: Scalar>(
    g: &mut Graph<'_, T>,
    pred: Var,
    target: &Tensor<T>,
    eps: f64,
) -> Result<Var> {
    g.value(pred).expect_same_dims(target)?;
    let e2 = T::cst(eps * eps);
    let n = T::from_usize(target.len().max(1)).unwrap();
    let roots: Vec<T> = g
        .value(pred)
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| ((a - b) * (a - b) + e2).sqrt())
        .collect();
    let loss = roots.iter().copied().sum::<T>() / n;
    let target = target.clone();
    Ok(g.record(Tensor::scalar(loss), &[pred], move |ctx| {
        let s = ctx.grad[0] / n;
        let p = ctx.inputs[0];
        let d = Tensor::from_fn(p.dims(), |i| s * (p[i] - target[i]) / roots[i]);
        vec![Some(d)]
    }))
}

// ---------------------------------------------------------------- schedule

/// Cosine annealing from `lr0` to `lr_min`, restarting every `cycle_epochs`.
pub fn cosine_lr(epoch: usize, lr0: f64, lr_min: f64, cycle_epochs: usize) -> f64 {
    let cycle = cycle_epochs.max(1);
    let phase = (epoch % cycle) as f64 / cycle as f64;
    lr_min + (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * phase).cos()) / 2.0
}

// ---------------------------------------------------------------- optimizer

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay and bias correction.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    pub t: u64,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
}

impl AdamW {
    pub fn new(store: &ParamStore<f32>, cfg: AdamWConfig) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, _, p)| Tensor::zeros(p.value.dims()))
                .collect()
        };
        Self {
            cfg,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Applies one update from the gradients held in `store`. Nothing is
    /// modified when any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore<f32>, lr: f64) -> Result<()> {
        for (_, name, p) in store.iter() {
            if p.trainable && !p.gradient.all_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let decay = (1.0 - lr * c.weight_decay) as f32;
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        for (i, (_, p)) in store.params_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            let g = p.gradient.data();
            for (j, x) in p.value.data_mut().iter_mut().enumerate() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = m[j] as f64 / bc1;
                let v_hat = v[j] as f64 / bc2;
                *x *= decay;
                *x -= (lr * m_hat / (v_hat.sqrt() + c.eps)) as f32;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- augmentation

/// A flip/rotation of a square grid, as the integer matrix acting on
/// centred `(x, y)` coordinates: horizontal flip, vertical flip, then
/// `rotations` quarter turns.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub struct Augmentation {
    pub flip_h: bool,
    pub flip_v: bool,
    pub rotations: u8,
}

impl Augmentation {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            flip_h: rng.gen_bool(0.5),
            flip_v: rng.gen_bool(0.5),
            rotations: rng.gen_range(0..4),
        }
    }

    /// `[[a, b], [c, d]]` mapping source offsets to destination offsets.
    pub fn matrix(&self) -> [[i64; 2]; 2] {
        let mut m = [
            [if self.flip_h { -1 } else { 1 }, 0],
            [0, if self.flip_v { -1 } else { 1 }],
        ];
        for _ in 0..self.rotations % 4 {
            // (x, y) → (−y, x)
            m = [[-m[1][0], -m[1][1]], [m[0][0], m[0][1]]];
        }
        m
    }

    fn permute(&self, t: &Tensor<f32>) -> Result<Tensor<f32>> {
        let (c, h, w) = t.chw()?;
        if h != w {
            return Err(config_err!(
                "flip/rotate augmentation needs square inputs, got {h}×{w}"
            ));
        }
        let m = self.matrix();
        let n = h as i64;
        let d = t.data();
        // Source offset = Mᵀ · destination offset, in doubled centred units.
        Ok(Tensor::from_fn(&[c, h, w], |i| {
            let (ci, r) = (i / (h * w), i % (h * w));
            let (xd, yd) = (2 * (r % w) as i64 - (n - 1), 2 * (r / w) as i64 - (n - 1));
            let xs = m[0][0] * xd + m[1][0] * yd;
            let ys = m[0][1] * xd + m[1][1] * yd;
            let (x, y) = (((xs + n - 1) / 2) as usize, ((ys + n - 1) / 2) as usize);
            d[ci * h * w + y * w + x]
        }))
    }

    /// Moves pixels and rotates the in-plane normal components to match.
    pub fn apply(&self, s: &Sample) -> Result<Sample> {
        let mut normals = self.permute(&s.priors.normals)?;
        let hw = normals.len() / 3;
        let m = self.matrix();
        let nd = normals.data_mut();
        for p in 0..hw {
            let (nx, ny) = (nd[p], nd[hw + p]);
            nd[p] = m[0][0] as f32 * nx + m[0][1] as f32 * ny;
            nd[hw + p] = m[1][0] as f32 * nx + m[1][1] as f32 * ny;
        }
        Ok(Sample {
            id: s.id.clone(),
            shadowed: self.permute(&s.shadowed)?,
            shadow_free: self.permute(&s.shadow_free)?,
            illumination: self.permute(&s.illumination)?,
            priors: ScenePriors {
                depth: self.permute(&s.priors.depth)?,
                normals,
                semantic: self.permute(&s.priors.semantic)?,
            },
            baseline_psnr: s.baseline_psnr,
        })
    }
}

// ---------------------------------------------------------------- training

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub lr_min: f64,
    pub cycle_epochs: usize,
    pub adam: AdamWConfig,
    pub batch: usize,
    pub epochs: usize,
    pub charbonnier_eps: f64,
    pub seed: u64,
    pub augment: bool,
    /// Number of manifest samples held out for validation.
    pub val_count: usize,
    /// Steps averaged for the smoothed loss.
    pub smoothing_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 2e-4,
            lr_min: 5e-5,
            cycle_epochs: 10,
            adam: AdamWConfig::default(),
            batch: 1,
            epochs: 5,
            charbonnier_eps: 1e-3,
            seed: 0,
            augment: true,
            val_count: 8,
            smoothing_window: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min < self.lr0) && !(self.lr0 == 0.0 && self.lr_min == 0.0) {
            return Err(config_err!(
                "lr_min ({}) must be below lr0 ({})",
                self.lr_min,
                self.lr0
            ));
        }
        if self.cycle_epochs == 0 || self.batch == 0 || self.smoothing_window == 0 {
            return Err(config_err!(
                "cycle_epochs, batch and smoothing_window must be positive"
            ));
        }
        if !(self.charbonnier_eps > 0.0) {
            return Err(config_err!("charbonnier_eps must be positive"));
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        kv.set(&mut self.lr0, "lr0")?;
        kv.set(&mut self.lr_min, "lr_min")?;
        kv.set(&mut self.cycle_epochs, "cycle_epochs")?;
        kv.set(&mut self.adam.beta1, "beta1")?;
        kv.set(&mut self.adam.beta2, "beta2")?;
        kv.set(&mut self.adam.eps, "adam_eps")?;
        kv.set(&mut self.adam.weight_decay, "weight_decay")?;
        kv.set(&mut self.batch, "batch")?;
        kv.set(&mut self.epochs, "epochs")?;
        kv.set(&mut self.charbonnier_eps, "charbonnier_eps")?;
        kv.set(&mut self.seed, "seed")?;
        kv.set(&mut self.augment, "augment")?;
        kv.set(&mut self.val_count, "val_count")?;
        kv.set(&mut self.smoothing_window, "smoothing_window")?;
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        cosine_lr(epoch, self.lr0, self.lr_min, self.cycle_epochs)
    }
}

/// Model and training settings read from one `key=value` file.
pub fn read_run_config(path: &Path) -> Result<(ModelConfig, TrainConfig)> {
    let mut kv = KeyValues::read(path)?;
    parse_run_config(&mut kv)
}

pub fn parse_run_config(kv: &mut KeyValues) -> Result<(ModelConfig, TrainConfig)> {
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    model.apply(kv)?;
    train.apply(kv)?;
    kv.clone().finish()?;
    Ok((model, train))
}

/// Mean of the first and last `window` entries.
pub fn smoothed_endpoints(losses: &[f64], window: usize) -> (f64, f64) {
    if losses.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = window.min(losses.len());
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&losses[..k]), mean(&losses[losses.len() - k..]))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: DenseSr,
    pub store: ParamStore<f32>,
    pub losses: Vec<f64>,
    /// Mean validation PSNR after every epoch.
    pub val_psnr: Vec<f64>,
    pub smoothed_initial: f64,
    pub smoothed_final: f64,
}

fn sample_loss(
    model: &DenseSr,
    store: &ParamStore<f32>,
    s: &Sample,
    eps: f64,
    scale: f64,
) -> Result<(f64, crate::autograd::Gradients<f32>)> {
    let mut g = Graph::with_params(store);
    let out = model.forward(&mut g, &s.shadowed, &s.priors, None)?;
    let loss = charbonnier(&mut g, out, &s.shadow_free, eps)?;
    let value = g.value(loss)[0] as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!(
            "training loss on sample {}",
            s.id
        )));
    }
    let seed = Tensor::scalar(scale as f32);
    Ok((value, g.backward_with(loss, seed)))
}

/// Trains from the model's initialization. Per-step and per-epoch rows are
/// written to `log` as `epoch  step  lr  loss  psnr`. With `out_dir`, a
/// checkpoint is written after every epoch, and the last good parameters are
/// saved before a non-finite loss or gradient aborts training.
pub fn train(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    out_dir: Option<&Path>,
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(config_err!("training set is empty"));
    }
    let (model, mut store) = DenseSr::init(model_cfg)?;
    let mut opt = AdamW::new(&store, cfg.adam.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let io_err = |e: std::io::Error| Error::io("training log", e);
    writeln!(log, "epoch\tstep\tlr\tloss\tpsnr").map_err(io_err)?;
    let mut losses = Vec::new();
    let mut val_psnr = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let save_good = |store: &ParamStore<f32>| -> Result<()> {
        match out_dir {
            Some(dir) => checkpoint::save(&dir.join("checkpoint"), model_cfg, store),
            None => Ok(()),
        }
    };
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            store.zero_grads();
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = if cfg.augment {
                    Augmentation::random(&mut rng).apply(&train_set[i])?
                } else {
                    train_set[i].clone()
                };
                let (loss, grads) = match sample_loss(
                    &model,
                    &store,
                    &s,
                    cfg.charbonnier_eps,
                    1.0 / batch.len() as f64,
                ) {
                    Ok(r) => r,
                    Err(e) => {
                        save_good(&store)?;
                        return Err(e);
                    }
                };
                grads.accumulate_into(&mut store);
                batch_loss += loss / batch.len() as f64;
            }
            if let Err(e) = opt.step(&mut store, lr) {
                save_good(&store)?;
                return Err(e);
            }
            losses.push(batch_loss);
            writeln!(log, "{epoch}\t{step}\t{lr:e}\t{batch_loss:.6e}\t").map_err(io_err)?;
            step += 1;
        }
        if !val_set.is_empty() {
            let report = evaluate(&model, &store, val_set)?;
            val_psnr.push(report.mean_psnr);
            let epoch_losses = &losses[losses.len() - order.len().div_ceil(cfg.batch)..];
            let mean_loss = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;
            writeln!(
                log,
                "{epoch}\t{step}\t{lr:e}\t{mean_loss:.6e}\t{:.4}",
                report.mean_psnr
            )
            .map_err(io_err)?;
        }
        save_good(&store)?;
    }
    let (smoothed_initial, smoothed_final) = smoothed_endpoints(&losses, cfg.smoothing_window);
    Ok(TrainOutcome {
        model,
        store,
        losses,
        val_psnr,
        smoothed_initial,
        smoothed_final,
    })
}

// ---------------------------------------------------------------- evaluation

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMetrics {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
    pub baseline_psnr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub samples: Vec<SampleMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_baseline_psnr: f64,
}

impl MetricReport {
    pub fn from_samples(samples: Vec<SampleMetrics>) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = |f: fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>() / n;
        Self {
            mean_psnr: mean(|s| s.psnr),
            mean_ssim: mean(|s| s.ssim),
            mean_baseline_psnr: mean(|s| s.baseline_psnr),
            samples,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("id\tpsnr\tssim\tbaseline_psnr\n");
        for m in &self.samples {
            s.push_str(&format!(
                "{}\t{:.4}\t{:.6}\t{:.4}\n",
                m.id, m.psnr, m.ssim, m.baseline_psnr
            ));
        }
        s.push_str(&format!(
            "mean\t{:.4}\t{:.6}\t{:.4}\n",
            self.mean_psnr, self.mean_ssim, self.mean_baseline_psnr
        ));
        s
    }
}

/// PSNR and SSIM of clamped predictions against the shadow-free targets.
pub fn evaluate(
    model: &DenseSr,
    store: &ParamStore<f32>,
    samples: &[Sample],
) -> Result<MetricReport> {
    let metrics = samples
        .iter()
        .map(|s| {
            let pred = clamp_unit(&model.predict(store, &s.shadowed, &s.priors, None)?);
            Ok(SampleMetrics {
                id: s.id.clone(),
                psnr: psnr(&pred, &s.shadow_free, 1.0)?,
                ssim: ssim(&pred, &s.shadow_free)?,
                baseline_psnr: s.baseline_psnr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_samples(metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;
    use proptest::prelude::*;

    #[test]
    fn charbonnier_values() {
        let a = Tensor::full(&[1, 2, 2], 0.5f32);
        assert!((charbonnier_loss(&a, &a, 1e-3).unwrap() - 1e-3).abs() < 1e-12);
        let b = a.map(|v| v + 3e-3);
        let d = (0.5f32 + 3e-3) as f64 - 0.5;
        let expect = (d * d + 1e-6).sqrt();
        assert!((charbonnier_loss(&b, &a, 1e-3).unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn charbonnier_gradient() {
        let x = Tensor::<f64>::from_fn(&[1, 4, 4], |i| (i as f64 * 0.37).sin() * 0.01);
        let target = Tensor::<f64>::from_fn(&[1, 4, 4], |i| (i as f64 * 0.91).cos() * 0.01);
        let r = grad_check(|g, x| charbonnier(g, x, &target, 1e-3), &x, 1e-7, None).unwrap();
        assert!(r.max_rel_error < 1e-5, "{r:?}");
        let mut g = Graph::new();
        let v = g.leaf(target.clone());
        let l = charbonnier(&mut g, v, &target, 1e-3).unwrap();
        assert!(g
            .backward(l)
            .wrt(v, target.dims())
            .data()
            .iter()
            .all(|&d| d == 0.0));
    }

    #[test]
    fn schedule_points() {
        assert_eq!(cosine_lr(0, 2e-4, 5e-5, 10), 2e-4);
        assert!((cosine_lr(5, 2e-4, 5e-5, 10) - 1.25e-4).abs() < 1e-15);
        assert_eq!(cosine_lr(10, 2e-4, 5e-5, 10), 2e-4);
    }

    fn one_param_store(v: f32) -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::full(&[1], v)).unwrap();
        s
    }

    #[test]
    fn adam_steady_state_step_is_lr() {
        let mut store = one_param_store(1.0);
        let mut opt = AdamW::new(
            &store,
            AdamWConfig {
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
        );
        let mut prev = 1.0f32;
        let mut delta = 0.0;
        for _ in 0..2000 {
            store
                .params_mut()
                .for_each(|(_, p)| p.gradient = Tensor::full(&[1], 0.3));
            opt.step(&mut store, 1e-3).unwrap();
            let now = store.by_name("w").unwrap().value[0];
            delta = (prev - now) as f64;
            prev = now;
        }
        assert!((delta - 1e-3).abs() < 1e-5, "{delta}");
    }

    #[test]
    fn adam_zero_gradient_cases() {
        let mut store = one_param_store(2.0);
        let mut opt = AdamW::new(
            &store,
            AdamWConfig {
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
        );
        opt.m[0][0] = 0.5;
        for _ in 0..3 {
            opt.step(&mut store, 1e-2).unwrap();
        }
        assert!((opt.m[0][0] - 0.5 * 0.9f32.powi(3)).abs() < 1e-7);

        let mut store = one_param_store(2.0);
        let mut opt = AdamW::new(&store, AdamWConfig::default());
        opt.step(&mut store, 0.0).unwrap();
        assert_eq!(store.by_name("w").unwrap().value[0], 2.0);
        let (lr, wd) = (0.1, 0.01);
        let mut expect = 2.0f32;
        for _ in 0..5 {
            opt.step(&mut store, lr).unwrap();
            expect *= (1.0 - lr * wd) as f32;
        }
        assert_eq!(store.by_name("w").unwrap().value[0], expect);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut store = one_param_store(1.0);
        let mut opt = AdamW::new(&store, AdamWConfig::default());
        store
            .params_mut()
            .for_each(|(_, p)| p.gradient = Tensor::full(&[1], f32::NAN));
        assert!(matches!(
            opt.step(&mut store, 1e-3),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(store.by_name("w").unwrap().value[0], 1.0);
        assert_eq!(opt.t, 0);
    }

    fn sample(n: usize) -> Sample {
        let hw = n * n;
        let normals = Tensor::from_fn(&[3, n, n], |i| {
            let (c, p) = (i / hw, i % hw);
            let a = p as f32 * 0.3;
            [a.cos() * 0.6, a.sin() * 0.6, 0.8][c]
        });
        Sample {
            id: "t".into(),
            shadowed: Tensor::from_fn(&[3, n, n], |i| i as f32),
            shadow_free: Tensor::from_fn(&[3, n, n], |i| -(i as f32)),
            illumination: Tensor::from_fn(&[1, n, n], |i| i as f32 * 0.5),
            priors: ScenePriors {
                depth: Tensor::from_fn(&[1, n, n], |i| 1.0 + i as f32),
                normals,
                semantic: Tensor::from_fn(&[2, n, n], |i| i as f32),
            },
            baseline_psnr: 0.0,
        }
    }

    #[test]
    fn identity_and_double_flip() {
        let s = sample(5);
        assert_eq!(Augmentation::default().apply(&s).unwrap(), s);
        let f = Augmentation {
            flip_h: true,
            ..Augmentation::default()
        };
        assert_eq!(f.apply(&f.apply(&s).unwrap()).unwrap(), s);
        let r = Augmentation {
            rotations: 1,
            ..Augmentation::default()
        };
        let mut x = s.clone();
        for _ in 0..4 {
            x = r.apply(&x).unwrap();
        }
        assert_eq!(x, s);
    }

    #[test]
    fn horizontal_flip_mirrors_columns_and_normals() {
        let s = sample(4);
        let f = Augmentation {
            flip_h: true,
            ..Augmentation::default()
        }
        .apply(&s)
        .unwrap();
        assert_eq!(f.shadowed[0], s.shadowed[3]);
        assert_eq!(f.priors.normals[0], -s.priors.normals[3]);
        assert_eq!(f.priors.normals[16], s.priors.normals[16 + 3]);
    }

    proptest! {
        #[test]
        fn augmented_normals_stay_unit(flip_h in any::<bool>(), flip_v in any::<bool>(), rotations in 0u8..4) {
            let s = sample(6);
            let a = Augmentation { flip_h, flip_v, rotations }.apply(&s).unwrap();
            let n = a.priors.normals.data();
            for p in 0..36 {
                let norm = (n[p].powi(2) + n[36 + p].powi(2) + n[72 + p].powi(2)).sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn smoothing_endpoints() {
        let l: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(smoothed_endpoints(&l, 10), (4.5, 94.5));
        assert_eq!(smoothed_endpoints(&l[..3], 10), (1.0, 1.0));
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        let mut kv = KeyValues::parse("lr0=1e-3\nbase_dim=8\nlearning_rate=3\n", "cfg").unwrap();
        assert!(parse_run_config(&mut kv).is_err());
        let mut kv = KeyValues::parse("lr0=1e-3\nbase_dim=8\n", "cfg").unwrap();
        let (m, t) = parse_run_config(&mut kv).unwrap();
        assert_eq!((m.base_dim, t.lr0), (8, 1e-3));
    }
}
