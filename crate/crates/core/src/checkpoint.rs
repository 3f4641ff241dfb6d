//! Model checkpoints: a directory with `config.txt` (the model
//! configuration as `key=value` lines), `params.txt` (one
//! `name<TAB>file` line per parameter) and one tensor file per parameter.

use std::fs;
use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::network::{DenseSr, ModelConfig};
use crate::param::ParamStore;
use crate::tensor_file::{read_tensor, write_tensor};

pub const CONFIG_FILE: &str = "config.txt";
pub const PARAMS_FILE: &str = "params.txt";

pub fn save(dir: &Path, cfg: &ModelConfig, store: &ParamStore<f32>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.to_kv()).map_err(|e| Error::io(&cfg_path, e))?;
    let mut index = String::new();
    for (_, name, p) in store.iter() {
        let file = format!("{name}.dst");
        write_tensor(&dir.join(&file), &p.value)?;
        index.push_str(&format!("{name}\t{file}\n"));
    }
    let idx_path = dir.join(PARAMS_FILE);
    fs::write(&idx_path, index).map_err(|e| Error::io(&idx_path, e))
}

pub fn load_config(dir: &Path) -> Result<ModelConfig> {
    let mut kv = KeyValues::read(&dir.join(CONFIG_FILE))?;
    let mut cfg = ModelConfig::default();
    cfg.apply(&mut kv)?;
    kv.finish()?;
    Ok(cfg)
}

/// Rebuilds the model from `config.txt` and fills every parameter from disk.
/// The stored parameter set must match the model's exactly.
pub fn load(dir: &Path) -> Result<(DenseSr, ParamStore<f32>)> {
    let cfg = load_config(dir)?;
    let (model, mut store) = DenseSr::init(&cfg)?;
    let idx_path = dir.join(PARAMS_FILE);
    let text = fs::read_to_string(&idx_path).map_err(|e| Error::io(&idx_path, e))?;
    let text_err = |line: usize, msg: String| Error::Text {
        source_name: idx_path.display().to_string(),
        line,
        msg,
    };
    let mut seen = vec![false; store.len()];
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let (name, file) = line
            .split_once('\t')
            .ok_or_else(|| text_err(i + 1, "expected name<TAB>file".into()))?;
        let id = store
            .id(name)
            .ok_or_else(|| text_err(i + 1, format!("model has no parameter {name:?}")))?;
        let t = read_tensor(&dir.join(file))?;
        let p = store.get_mut(id);
        if t.dims() != p.value.dims() {
            return Err(text_err(
                i + 1,
                format!(
                    "{name}: stored dims {:?}, model expects {:?}",
                    t.dims(),
                    p.value.dims()
                ),
            ));
        }
        p.value = t;
        seen[id.index()] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let name = store
            .iter()
            .nth(missing)
            .map(|(_, n, _)| n.to_string())
            .unwrap_or_default();
        return Err(text_err(
            0,
            format!("checkpoint is missing parameter {name:?}"),
        ));
    }
    Ok((model, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfb::DfbConfig;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig {
            base_dim: 4,
            window: 4,
            shift: 2,
            dfb: DfbConfig {
                compressed_channels: 4,
                ..DfbConfig::default()
            },
            d_sem: 4,
            seed: 17,
            ..ModelConfig::default()
        };
        let (_, store) = DenseSr::init(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &cfg, &store).unwrap();
        let (model, back) = load(dir.path()).unwrap();
        assert_eq!(model.cfg, cfg);
        for ((_, na, a), (_, nb, b)) in store.iter().zip(back.iter()) {
            assert_eq!(na, nb);
            assert!(a
                .value
                .data()
                .iter()
                .zip(b.value.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn missing_parameter_is_reported() {
        let cfg = ModelConfig {
            base_dim: 4,
            window: 4,
            shift: 2,
            d_sem: 4,
            ..ModelConfig::default()
        };
        let (_, store) = DenseSr::init(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &cfg, &store).unwrap();
        let idx = dir.path().join(PARAMS_FILE);
        let text = fs::read_to_string(&idx).unwrap();
        fs::write(
            &idx,
            text.lines()
                .skip(1)
                .map(|l| format!("{l}\n"))
                .collect::<String>(),
        )
        .unwrap();
        assert!(matches!(load(dir.path()), Err(Error::Text { .. })));
    }
}
