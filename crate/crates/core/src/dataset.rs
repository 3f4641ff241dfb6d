//! On-disk datasets: tensor files per sample plus a tab-separated manifest.
//!
//! Each manifest line is
//! `id  seed  shadowed  shadow_free  illumination  depth  normals  semantic  softness  baseline_psnr`
//! with paths relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image_io;
use crate::metrics::psnr;
use crate::network::ScenePriors;
use crate::synth::{gen_scene, sample_seed, Scene, SceneParams};
use crate::tensor::Tensor;
use crate::tensor_file::{read_tensor, write_tensor};

pub const MANIFEST_NAME: &str = "manifest.tsv";
const FIELDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub seed: u64,
    pub shadowed: String,
    pub shadow_free: String,
    pub illumination: String,
    pub depth: String,
    pub normals: String,
    pub semantic: String,
    pub softness: f64,
    /// PSNR of the shadowed input against the target.
    pub baseline_psnr: f64,
}

impl ManifestRecord {
    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:?}\t{:?}",
            self.id,
            self.seed,
            self.shadowed,
            self.shadow_free,
            self.illumination,
            self.depth,
            self.normals,
            self.semantic,
            self.softness,
            self.baseline_psnr
        )
    }

    pub fn files(&self) -> [&str; 6] {
        [
            &self.shadowed,
            &self.shadow_free,
            &self.illumination,
            &self.depth,
            &self.normals,
            &self.semantic,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn parse(text: &str, root: &Path) -> Result<Self> {
        let source_name = root.join(MANIFEST_NAME).display().to_string();
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| Error::Text {
                source_name: source_name.clone(),
                line: i + 1,
                msg,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != FIELDS {
                return Err(err(format!(
                    "expected {FIELDS} tab-separated fields, got {}",
                    f.len()
                )));
            }
            let num = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad {what} {s:?}: {e}")))
            };
            records.push(ManifestRecord {
                id: f[0].to_string(),
                seed: f[1]
                    .parse()
                    .map_err(|e| err(format!("bad seed {:?}: {e}", f[1])))?,
                shadowed: f[2].to_string(),
                shadow_free: f[3].to_string(),
                illumination: f[4].to_string(),
                depth: f[5].to_string(),
                normals: f[6].to_string(),
                semantic: f[7].to_string(),
                softness: num(f[8], "softness")?,
                baseline_psnr: num(f[9], "baseline psnr")?,
            });
        }
        Ok(Self {
            root: root.to_path_buf(),
            records,
        })
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text, dir)
    }

    pub fn to_text(&self) -> String {
        self.records.iter().map(|r| r.to_line() + "\n").collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn load(&self, index: usize) -> Result<Sample> {
        let r = &self.records[index];
        let read = |name: &str| read_tensor(&self.root.join(name));
        Ok(Sample {
            id: r.id.clone(),
            shadowed: read(&r.shadowed)?,
            shadow_free: read(&r.shadow_free)?,
            illumination: read(&r.illumination)?,
            priors: ScenePriors {
                depth: read(&r.depth)?,
                normals: read(&r.normals)?,
                semantic: read(&r.semantic)?,
            },
            baseline_psnr: r.baseline_psnr,
        })
    }

    pub fn load_all(&self) -> Result<Vec<Sample>> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }
}

/// One training or evaluation example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub shadowed: Tensor<f32>,
    pub shadow_free: Tensor<f32>,
    pub illumination: Tensor<f32>,
    pub priors: ScenePriors,
    pub baseline_psnr: f64,
}

impl Sample {
    pub fn from_scene(id: impl Into<String>, scene: &Scene) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            baseline_psnr: psnr(&scene.shadowed, &scene.shadow_free, 1.0)?,
            shadowed: scene.shadowed.clone(),
            shadow_free: scene.shadow_free.clone(),
            illumination: scene.illumination.clone(),
            priors: scene.priors.clone(),
        })
    }
}

pub const PRIOR_FILES: [&str; 3] = ["depth.dst", "normals.dst", "semantic.dst"];

/// Reads `depth.dst`, `normals.dst` and `semantic.dst` from `dir`.
pub fn read_priors(dir: &Path) -> Result<ScenePriors> {
    let [d, n, s] = PRIOR_FILES.map(|f| dir.join(f));
    let priors = ScenePriors {
        depth: read_tensor(&d)?,
        normals: read_tensor(&n)?,
        semantic: read_tensor(&s)?,
    };
    priors.validate(priors.semantic.dims().first().copied().unwrap_or(0))?;
    Ok(priors)
}

pub fn write_priors(dir: &Path, priors: &ScenePriors) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (f, t) in PRIOR_FILES
        .iter()
        .zip([&priors.depth, &priors.normals, &priors.semantic])
    {
        write_tensor(&dir.join(f), t)?;
    }
    Ok(())
}

/// Generates `n` scenes in memory; sample `i` uses `sample_seed(seed, i)`.
pub fn generate(n: usize, seed: u64, params: &SceneParams) -> Result<Vec<Sample>> {
    (0..n)
        .map(|i| {
            let scene = gen_scene(sample_seed(seed, i), params)?;
            Sample::from_scene(format!("{i:05}"), &scene)
        })
        .collect()
}

/// Writes `n` scenes and the manifest to `out_dir`; with `png` set, the
/// shadowed and shadow-free images are also exported for inspection.
pub fn export_dataset(
    n: usize,
    seed: u64,
    params: &SceneParams,
    out_dir: &Path,
    png: bool,
) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let s = sample_seed(seed, i);
        let scene = gen_scene(s, params)?;
        let id = format!("{i:05}");
        let name = |kind: &str| format!("{id}_{kind}.dst");
        let rec = ManifestRecord {
            id: id.clone(),
            seed: s,
            shadowed: name("shadowed"),
            shadow_free: name("free"),
            illumination: name("illum"),
            depth: name("depth"),
            normals: name("normals"),
            semantic: name("semantic"),
            softness: scene.softness,
            baseline_psnr: psnr(&scene.shadowed, &scene.shadow_free, 1.0)?,
        };
        let tensors = [
            &scene.shadowed,
            &scene.shadow_free,
            &scene.illumination,
            &scene.priors.depth,
            &scene.priors.normals,
            &scene.priors.semantic,
        ];
        for (file, t) in rec.files().iter().zip(tensors) {
            write_tensor(&out_dir.join(file), t)?;
        }
        if png {
            image_io::save_rgb(&out_dir.join(format!("{id}_shadowed.png")), &scene.shadowed)?;
            image_io::save_rgb(&out_dir.join(format!("{id}_free.png")), &scene.shadow_free)?;
        }
        records.push(rec);
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        records,
    };
    let path = out_dir.join(MANIFEST_NAME);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
