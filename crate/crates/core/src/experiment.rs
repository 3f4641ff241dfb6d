//! The desk-scale training experiment and feature-spectrum probes.

use std::path::Path;

use crate::dataset::{generate, Sample};
use crate::error::{config_err, Result};
use crate::network::{DenseSr, ForwardTrace, ModelConfig, ScenePriors};
use crate::param::ParamStore;
use crate::spectrum::{fft_hf_ratio, log_spectrum_image};
use crate::synth::SceneParams;
use crate::tensor::Tensor;
use crate::train::{train, TrainConfig, TrainOutcome};

/// Radius threshold, as a fraction of Nyquist, for high-frequency energy.
pub const HF_RADIUS: f64 = 0.5;

/// Trace name of decoder stage `i` (0 is the deepest, 2 the final one).
pub fn decoder_stage(i: usize) -> Result<String> {
    if i > 2 {
        return Err(config_err!("decoder stage must be 0, 1 or 2, got {i}"));
    }
    Ok(format!("dec{i}"))
}

/// A width-8 model trained for a few epochs on synthetic 64×64 scenes.
#[derive(Clone, Debug)]
pub struct ToyExperiment {
    pub train_count: usize,
    pub val_count: usize,
    pub seed: u64,
    pub scene: SceneParams,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ToyExperiment {
    fn default() -> Self {
        Self {
            train_count: 128,
            val_count: 16,
            seed: 1,
            scene: SceneParams::default(),
            model: ModelConfig {
                fan_in_init: true,
                ..ModelConfig::with_width(8)
            },
            train: TrainConfig {
                lr0: 5e-4,
                lr_min: 1.25e-4,
                epochs: 5,
                ..TrainConfig::default()
            },
        }
    }
}

pub struct ToyRun {
    pub outcome: TrainOutcome,
    /// Mean do-nothing PSNR of the held-out scenes.
    pub baseline_psnr: f64,
}

impl ToyRun {
    pub fn final_val_psnr(&self) -> f64 {
        self.outcome.val_psnr.last().copied().unwrap_or(f64::NAN)
    }

    pub fn loss_ratio(&self) -> f64 {
        self.outcome.smoothed_final / self.outcome.smoothed_initial
    }
}

impl ToyExperiment {
    /// Training and held-out scenes; the held-out set uses a disjoint seed.
    pub fn data(&self) -> Result<(Vec<Sample>, Vec<Sample>)> {
        let train_set = generate(self.train_count, self.seed, &self.scene)?;
        let val_set = generate(self.val_count, self.seed.wrapping_add(1_000), &self.scene)?;
        Ok((train_set, val_set))
    }

    pub fn run(
        &self,
        use_dfb: bool,
        data: &(Vec<Sample>, Vec<Sample>),
        out_dir: Option<&Path>,
    ) -> Result<ToyRun> {
        let model = ModelConfig {
            use_dfb,
            ..self.model.clone()
        };
        let train_cfg = TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        };
        let (train_set, val_set) = data;
        let mut log: Vec<u8> = Vec::new();
        let outcome = train(&model, &train_cfg, train_set, val_set, out_dir, &mut log)?;
        if let Some(dir) = out_dir {
            let path = dir.join("train_log.tsv");
            std::fs::write(&path, &log).map_err(|e| crate::error::Error::io(&path, e))?;
        }
        let baseline_psnr =
            val_set.iter().map(|s| s.baseline_psnr).sum::<f64>() / val_set.len().max(1) as f64;
        Ok(ToyRun {
            outcome,
            baseline_psnr,
        })
    }
}

/// The activation recorded at `stage` for one forward pass.
pub fn stage_feature(
    model: &DenseSr,
    store: &ParamStore<f32>,
    image: &Tensor<f32>,
    priors: &ScenePriors,
    stage: &str,
) -> Result<Tensor<f32>> {
    let mut trace = ForwardTrace::capturing();
    model.predict(store, image, priors, Some(&mut trace))?;
    trace
        .get(stage)
        .and_then(|r| r.activation.clone())
        .ok_or_else(|| config_err!("forward pass recorded no stage named {stage:?}"))
}

/// Mean high-frequency energy ratio of a stage's feature over `samples`.
pub fn mean_hf_ratio(
    model: &DenseSr,
    store: &ParamStore<f32>,
    samples: &[Sample],
    stage: &str,
) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        total += fft_hf_ratio(
            &stage_feature(model, store, &s.shadowed, &s.priors, stage)?,
            HF_RADIUS,
        )?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// High-frequency ratio and log-magnitude spectrum image of one feature.
pub fn feature_spectrum(
    model: &DenseSr,
    store: &ParamStore<f32>,
    image: &Tensor<f32>,
    priors: &ScenePriors,
    stage: &str,
) -> Result<(f64, Tensor<f32>)> {
    let feature = stage_feature(model, store, image, priors, stage)?;
    Ok((
        fft_hf_ratio(&feature, HF_RADIUS)?,
        log_spectrum_image(&feature)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names() {
        assert_eq!(decoder_stage(2).unwrap(), "dec2");
        assert!(decoder_stage(3).is_err());
    }

    #[test]
    fn spectrum_of_a_decoder_stage() {
        let cfg = ModelConfig {
            base_dim: 4,
            window: 4,
            shift: 2,
            d_sem: 4,
            fan_in_init: true,
            ..ModelConfig::default()
        };
        let (model, store) = DenseSr::init(&cfg).unwrap();
        let image = Tensor::from_fn(&[3, 16, 16], |i| ((i * 7) % 11) as f32 / 11.0);
        let priors = ScenePriors::neutral(16, 16, 4);
        let (ratio, img) = feature_spectrum(&model, &store, &image, &priors, "dec2").unwrap();
        assert!((0.0..=1.0).contains(&ratio));
        assert_eq!(img.dims(), &[1, 16, 16]);
        assert!(stage_feature(&model, &store, &image, &priors, "nope").is_err());
    }
}
