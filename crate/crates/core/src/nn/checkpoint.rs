//! On-disk network checkpoints: a `manifest.txt` plus one raw little-endian
//! `f64` file per tensor (`<layer>.<weight|bias>.f64`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::{format_sizes, parse_sizes, KvFile};
use crate::math::Matrix;
use crate::nn::{MeanActivation, MlpParams, VarianceMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub steps: u64,
}

pub fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            file: path.display().to_string(),
            detail: format!("{} bytes is not a whole number of f64 values", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let data = read_f64s(path)?;
    Matrix::new(rows, cols, data).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn save_mlp(params: &MlpParams, meta: CheckpointMeta, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut kv = KvFile::new();
    kv.set("layer_sizes", format_sizes(params.sizes()));
    kv.set("hidden_activation", "tanh");
    kv.set("mean_activation", params.mean_activation.name());
    match params.variance {
        VarianceMode::Learned => kv.set("variance", "learned"),
        VarianceMode::Fixed(v) => kv.set("variance", format!("fixed:{v:e}")),
    }
    kv.set("seed", meta.seed);
    kv.set("steps", meta.steps);
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    kv.set("tensors", names.join(","));
    kv.write(&dir.join("manifest.txt"))?;
    for (name, data) in params.named_tensors() {
        write_f64s(&dir.join(format!("{name}.f64")), data)?;
    }
    Ok(())
}

pub fn load_mlp(dir: &Path) -> Result<(MlpParams, CheckpointMeta)> {
    let manifest = dir.join("manifest.txt");
    let origin = manifest.display().to_string();
    let kv = KvFile::read(&manifest)?;
    let bad = |detail: String| Error::Parse {
        file: origin.clone(),
        detail,
    };
    let sizes = parse_sizes(kv.require("layer_sizes", &origin)?)
        .ok_or_else(|| bad("bad layer_sizes".into()))?;
    if kv.require("hidden_activation", &origin)? != "tanh" {
        return Err(bad("only tanh hidden activations are supported".into()));
    }
    let mean_activation = MeanActivation::from_name(kv.require("mean_activation", &origin)?)
        .ok_or_else(|| bad("bad mean_activation".into()))?;
    let variance = match kv.require("variance", &origin)? {
        "learned" => VarianceMode::Learned,
        other => {
            let v = other
                .strip_prefix("fixed:")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("bad variance {other:?}")))?;
            VarianceMode::Fixed(v)
        }
    };
    let meta = CheckpointMeta {
        seed: kv.parse_value("seed", &origin)?,
        steps: kv.parse_value("steps", &origin)?,
    };
    let mut params = MlpParams::new(&sizes, mean_activation, variance, &mut crate::math::RngState::new(0))?;
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in names.iter().zip(params.tensors_mut()) {
        let path = dir.join(format!("{name}.f64"));
        let data = read_f64s(&path)?;
        if data.len() != slot.len() {
            return Err(Error::Parse {
                file: path.display().to_string(),
                detail: format!("expected {} values, found {}", slot.len(), data.len()),
            });
        }
        slot.copy_from_slice(&data);
    }
    Ok((params, meta))
}
