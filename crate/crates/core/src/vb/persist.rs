//! Model directory layout:
//!
//! ```text
//! manifest.txt            k, k_bar, n_train, d1, d2, seed, steps, hyperparameters
//! recognition/            network checkpoint
//! generative/             network checkpoint
//! vb/*.f64                conjugate factors (raw little-endian f64)
//! train_latents.f64       ⟨z_i⟩ of the training rows
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::math::GammaPosterior;
use crate::nn::{load_mlp, read_f64s, read_matrix, save_mlp, write_f64s, CheckpointMeta};
use crate::vb::state::{GaussianMatrixPosterior, Hyperparameters, PrivateLatentPosterior, VbState};
use crate::vb::TrainedModel;

fn write_gammas(path: &Path, gs: &[GammaPosterior]) -> Result<()> {
    let flat: Vec<f64> = gs.iter().flat_map(|g| [g.shape, g.rate]).collect();
    write_f64s(path, &flat)
}

fn read_gammas(path: &Path, count: usize) -> Result<Vec<GammaPosterior>> {
    let flat = read_f64s(path)?;
    if flat.len() != 2 * count {
        return Err(Error::Parse {
            file: path.display().to_string(),
            detail: format!("expected {} values, found {}", 2 * count, flat.len()),
        });
    }
    flat.chunks_exact(2)
        .map(|c| GammaPosterior::new(c[0], c[1]))
        .collect()
}

fn write_projection(dir: &Path, name: &str, q: &GaussianMatrixPosterior) -> Result<()> {
    write_f64s(&dir.join(format!("{name}_mean.f64")), q.mean.as_slice())?;
    let covs: Vec<f64> = q.cov.iter().flat_map(|c| c.as_slice().to_vec()).collect();
    write_f64s(&dir.join(format!("{name}_cov.f64")), &covs)
}

fn read_projection(dir: &Path, name: &str, dim: usize, d2: usize) -> Result<GaussianMatrixPosterior> {
    let mean = read_matrix(&dir.join(format!("{name}_mean.f64")), dim, d2)?;
    let all = read_matrix(&dir.join(format!("{name}_cov.f64")), d2 * dim, dim)?;
    let cov = (0..d2)
        .map(|j| all.select_rows(&(j * dim..(j + 1) * dim).collect::<Vec<_>>()))
        .collect();
    Ok(GaussianMatrixPosterior { mean, cov })
}

pub fn save_model(model: &TrainedModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("vb"))?;
    let vb = &model.vb;
    let mut kv = KvFile::new();
    kv.set("k", vb.k());
    kv.set("k_bar", vb.k_bar());
    kv.set("n_train", vb.n());
    kv.set("d1", model.recog.input_dim());
    kv.set("d2", vb.d2());
    kv.set("seed", model.seed);
    kv.set("steps", model.steps);
    let h = vb.hyper;
    for (name, g) in [("tau", h.tau), ("eta", h.eta), ("gamma", h.gamma)] {
        kv.set(&format!("prior_{name}_shape"), format!("{:e}", g.shape));
        kv.set(&format!("prior_{name}_rate"), format!("{:e}", g.rate));
    }
    kv.write(&dir.join("manifest.txt"))?;

    let meta = CheckpointMeta {
        seed: model.seed,
        steps: model.steps,
    };
    save_mlp(&model.recog, meta, &dir.join("recognition"))?;
    save_mlp(&model.gen, meta, &dir.join("generative"))?;

    let vdir = dir.join("vb");
    write_projection(&vdir, "b", &vb.q_b)?;
    write_projection(&vdir, "h", &vb.q_h)?;
    write_f64s(&vdir.join("zbar_mean.f64"), vb.q_zbar.mean.as_slice())?;
    write_f64s(&vdir.join("zbar_cov.f64"), vb.q_zbar.cov.as_slice())?;
    write_gammas(&vdir.join("tau.f64"), &vb.q_tau)?;
    write_gammas(&vdir.join("eta.f64"), &vb.q_eta)?;
    write_gammas(&vdir.join("gamma.f64"), &[vb.q_gamma])?;
    write_f64s(&dir.join("train_latents.f64"), model.train_latents.as_slice())?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let manifest = dir.join("manifest.txt");
    let origin = manifest.display().to_string();
    let kv = KvFile::read(&manifest)?;
    let k: usize = kv.parse_value("k", &origin)?;
    let k_bar: usize = kv.parse_value("k_bar", &origin)?;
    let n: usize = kv.parse_value("n_train", &origin)?;
    let d2: usize = kv.parse_value("d2", &origin)?;
    let prior = |name: &str| -> Result<GammaPosterior> {
        GammaPosterior::new(
            kv.parse_value(&format!("prior_{name}_shape"), &origin)?,
            kv.parse_value(&format!("prior_{name}_rate"), &origin)?,
        )
    };
    let hyper = Hyperparameters {
        tau: prior("tau")?,
        eta: prior("eta")?,
        gamma: prior("gamma")?,
    };

    let (recog, meta) = load_mlp(&dir.join("recognition"))?;
    let (gen, _) = load_mlp(&dir.join("generative"))?;
    if recog.output_dim() != k || gen.input_dim() != k {
        return Err(Error::Parse {
            file: origin,
            detail: format!("networks disagree with k = {k}"),
        });
    }

    let vdir = dir.join("vb");
    let vb = VbState {
        q_b: read_projection(&vdir, "b", k, d2)?,
        q_h: read_projection(&vdir, "h", k_bar, d2)?,
        q_zbar: PrivateLatentPosterior {
            mean: read_matrix(&vdir.join("zbar_mean.f64"), n, k_bar)?,
            cov: read_matrix(&vdir.join("zbar_cov.f64"), k_bar, k_bar)?,
        },
        q_tau: read_gammas(&vdir.join("tau.f64"), d2)?,
        q_eta: read_gammas(&vdir.join("eta.f64"), d2)?,
        q_gamma: read_gammas(&vdir.join("gamma.f64"), 1)?[0],
        hyper,
    };
    let train_latents = read_matrix(&dir.join("train_latents.f64"), n, k)?;
    Ok(TrainedModel {
        recog,
        gen,
        vb,
        train_latents,
        seed: meta.seed,
        steps: meta.steps,
    })
}
