use std::fs;
use std::path::Path;

use crate::data::dataset::{read_matrix_csv, write_matrix_csv, Manifest, PixelRange, TwoViewDataset};
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::math::{Matrix, RngState};
use crate::nn::{load_mlp, save_mlp, CheckpointMeta, MeanActivation, MlpParams, VarianceMode};

/// How latent codes become images.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    /// `x = W z` with `W` entries drawn from N(0, 1/K).
    Linear,
    /// Fixed random network with one tanh hidden layer and a logistic output.
    Mlp { hidden: usize },
}

impl MapKind {
    pub fn name(self) -> String {
        match self {
            MapKind::Linear => "linear".into(),
            MapKind::Mlp { hidden } => format!("mlp:{hidden}"),
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(MapKind::Linear),
            _ => s
                .strip_prefix("mlp:")
                .and_then(|h| h.parse().ok())
                .filter(|&h| h > 0)
                .map(|hidden| MapKind::Mlp { hidden }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub name: String,
    /// Total rows; the last `n_test` rows form the test split.
    pub n: usize,
    pub n_test: usize,
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    pub k_bar: usize,
    /// Image width; `None` picks a square when `d1` is a perfect square.
    pub width: Option<usize>,
    /// Voxel noise precision; `f64::INFINITY` gives noiseless voxels.
    pub voxel_precision: f64,
    /// Pixel noise precision; `f64::INFINITY` gives noiseless images.
    pub pixel_precision: f64,
    pub map: MapKind,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n: 100,
            n_test: 20,
            d1: 784,
            d2: 3092,
            k: 10,
            k_bar: 10,
            width: None,
            voxel_precision: 10.0,
            pixel_precision: 100.0,
            map: MapKind::Linear,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn image_shape(&self) -> (usize, usize) {
        match self.width {
            Some(w) if w > 0 && self.d1.is_multiple_of(w) => (w, self.d1 / w),
            Some(_) => (0, 0),
            None => {
                let side = (self.d1 as f64).sqrt().round() as usize;
                if side * side == self.d1 {
                    (side, side)
                } else {
                    (self.d1, 1)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let dims = [self.n, self.d1, self.d2, self.k, self.k_bar];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("synthetic dimensions must be positive: {self:?}")));
        }
        if self.n_test >= self.n {
            return Err(Error::InvalidConfig(format!(
                "n_test = {} leaves no training rows out of {}",
                self.n_test, self.n
            )));
        }
        for (what, v) in [("voxel", self.voxel_precision), ("pixel", self.pixel_precision)] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{what} noise precision must be positive, got {v}")));
            }
        }
        if self.image_shape().0 == 0 {
            return Err(Error::InvalidConfig(format!("width does not divide d1 = {}", self.d1)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenerativeMap {
    /// `D1 x K`.
    Linear(Matrix),
    Mlp(MlpParams),
}

impl GenerativeMap {
    /// Noise-free images for latent rows `z` (N x K).
    pub fn apply(&self, z: &Matrix) -> Result<Matrix> {
        match self {
            GenerativeMap::Linear(w) => Ok(z.matmul_t(w)),
            GenerativeMap::Mlp(net) => net.forward_mean(z),
        }
    }
}

/// Everything drawn while generating a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGroundTruth {
    /// K x D2 shared loadings.
    pub b: Matrix,
    /// K̄ x D2 private loadings.
    pub h: Matrix,
    /// Shared latents, one row per instance (N x K).
    pub z: Matrix,
    /// Private latents, one row per instance (N x K̄).
    pub zbar: Matrix,
    pub tau: Vec<f64>,
    pub eta: Vec<f64>,
    pub map: GenerativeMap,
    pub voxel_precision: f64,
    pub pixel_precision: f64,
    pub seed: u64,
}

fn gaussian(rng: &mut RngState, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.normal())
}

fn noise_sd(precision: f64) -> f64 {
    1.0 / precision.sqrt()
}

/// Samples a two-view dataset from the generative process. Each group of
/// draws uses its own RNG stream, so the result depends only on the config.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(TwoViewDataset, SyntheticGroundTruth)> {
    cfg.validate()?;
    let (n, d1, d2, k, k_bar) = (cfg.n, cfg.d1, cfg.d2, cfg.k, cfg.k_bar);

    let mut rng = RngState::with_stream(cfg.seed, 0);
    let tau: Vec<f64> = (0..d2).map(|_| rng.gamma(1.0, 1.0)).collect();
    let eta: Vec<f64> = (0..d2).map(|_| rng.gamma(1.0, 1.0)).collect();
    let mut b = gaussian(&mut rng, k, d2, 1.0);
    let mut h = gaussian(&mut rng, k_bar, d2, 1.0);
    for j in 0..d2 {
        let (sb, sh) = (tau[j].sqrt().recip(), eta[j].sqrt().recip());
        for r in 0..k {
            b.as_mut_slice()[r * d2 + j] *= sb;
        }
        for r in 0..k_bar {
            h.as_mut_slice()[r * d2 + j] *= sh;
        }
    }

    let mut rng = RngState::with_stream(cfg.seed, 1);
    let map = match cfg.map {
        MapKind::Linear => GenerativeMap::Linear(gaussian(&mut rng, d1, k, (k as f64).sqrt().recip())),
        MapKind::Mlp { hidden } => GenerativeMap::Mlp(MlpParams::new(
            &[k, hidden, d1],
            MeanActivation::Logistic,
            VarianceMode::Fixed(1.0),
            &mut rng,
        )?),
    };

    let mut rng = RngState::with_stream(cfg.seed, 2);
    let z = gaussian(&mut rng, n, k, 1.0);
    let zbar = gaussian(&mut rng, n, k_bar, 1.0);

    let mut rng = RngState::with_stream(cfg.seed, 3);
    let mut y = z.matmul(&b);
    y.add_assign(&zbar.matmul(&h));
    if cfg.voxel_precision.is_finite() {
        y.add_assign(&gaussian(&mut rng, n, d2, noise_sd(cfg.voxel_precision)));
    }

    let mut rng = RngState::with_stream(cfg.seed, 4);
    let mut x = map.apply(&z)?;
    if cfg.pixel_precision.is_finite() {
        x.add_assign(&gaussian(&mut rng, n, d1, noise_sd(cfg.pixel_precision)));
    }
    let (pixel_range, dynamic_range) = match cfg.map {
        MapKind::Mlp { .. } => {
            x = x.map(|v| v.clamp(0.0, 1.0));
            (PixelRange::Bounded01, 1.0)
        }
        MapKind::Linear => {
            let lo = x.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (PixelRange::Unbounded, (hi - lo).max(f64::MIN_POSITIVE))
        }
    };

    let (width, height) = cfg.image_shape();
    let n_train = n - cfg.n_test;
    let manifest = Manifest {
        name: cfg.name.clone(),
        n,
        d1,
        d2,
        width,
        height,
        pixel_range,
        dynamic_range,
        seed: Some(cfg.seed),
        k: Some(k),
        k_bar: Some(k_bar),
        dropped_voxels: Vec::new(),
    };
    let ds = TwoViewDataset::new(x, y, (0..n_train).collect(), (n_train..n).collect(), manifest)?;
    let truth = SyntheticGroundTruth {
        b,
        h,
        z,
        zbar,
        tau,
        eta,
        map,
        voxel_precision: cfg.voxel_precision,
        pixel_precision: cfg.pixel_precision,
        seed: cfg.seed,
    };
    Ok((ds, truth))
}

/// Writes the ground truth as CSV files plus `manifest.txt` into `dir`.
pub fn save_ground_truth(truth: &SyntheticGroundTruth, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut kv = KvFile::new();
    kv.set("k", truth.b.rows());
    kv.set("k_bar", truth.h.rows());
    kv.set("d2", truth.b.cols());
    kv.set("n", truth.z.rows());
    kv.set("voxel_precision", format!("{:e}", truth.voxel_precision));
    kv.set("pixel_precision", format!("{:e}", truth.pixel_precision));
    kv.set("seed", truth.seed);
    write_matrix_csv(&dir.join("b.csv"), &truth.b)?;
    write_matrix_csv(&dir.join("h.csv"), &truth.h)?;
    write_matrix_csv(&dir.join("z.csv"), &truth.z)?;
    write_matrix_csv(&dir.join("zbar.csv"), &truth.zbar)?;
    let d2 = truth.tau.len();
    write_matrix_csv(&dir.join("tau.csv"), &Matrix::new(1, d2, truth.tau.clone())?)?;
    write_matrix_csv(&dir.join("eta.csv"), &Matrix::new(1, d2, truth.eta.clone())?)?;
    match &truth.map {
        GenerativeMap::Linear(w) => {
            kv.set("map", "linear");
            kv.set("d1", w.rows());
            write_matrix_csv(&dir.join("map_weights.csv"), w)?;
        }
        GenerativeMap::Mlp(net) => {
            kv.set("map", "mlp");
            kv.set("d1", net.output_dim());
            save_mlp(net, CheckpointMeta { seed: truth.seed, steps: 0 }, &dir.join("map"))?;
        }
    }
    kv.write(&dir.join("manifest.txt"))
}

pub fn load_ground_truth(dir: &Path) -> Result<SyntheticGroundTruth> {
    let path = dir.join("manifest.txt");
    let origin = path.display().to_string();
    let kv = KvFile::read(&path)?;
    let (k, k_bar, d1, d2, n): (usize, usize, usize, usize, usize) = (
        kv.parse_value("k", &origin)?,
        kv.parse_value("k_bar", &origin)?,
        kv.parse_value("d1", &origin)?,
        kv.parse_value("d2", &origin)?,
        kv.parse_value("n", &origin)?,
    );
    let map = match kv.require("map", &origin)? {
        "linear" => GenerativeMap::Linear(read_matrix_csv(&dir.join("map_weights.csv"), Some((d1, k)))?),
        "mlp" => GenerativeMap::Mlp(load_mlp(&dir.join("map"))?.0),
        other => {
            return Err(Error::Parse {
                file: origin,
                detail: format!("unknown map {other:?}"),
            })
        }
    };
    Ok(SyntheticGroundTruth {
        b: read_matrix_csv(&dir.join("b.csv"), Some((k, d2)))?,
        h: read_matrix_csv(&dir.join("h.csv"), Some((k_bar, d2)))?,
        z: read_matrix_csv(&dir.join("z.csv"), Some((n, k)))?,
        zbar: read_matrix_csv(&dir.join("zbar.csv"), Some((n, k_bar)))?,
        tau: read_matrix_csv(&dir.join("tau.csv"), Some((1, d2)))?.into_vec(),
        eta: read_matrix_csv(&dir.join("eta.csv"), Some((1, d2)))?.into_vec(),
        map,
        voxel_precision: kv.parse_value("voxel_precision", &origin)?,
        pixel_precision: kv.parse_value("pixel_precision", &origin)?,
        seed: kv.parse_value("seed", &origin)?,
    })
}
