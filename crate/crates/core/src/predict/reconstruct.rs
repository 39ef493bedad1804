use crate::error::{Error, Result};
use crate::eval::pcc;
use crate::math::{Matrix, RngState};
use crate::nn::MlpParams;
use crate::par;
use crate::predict::affinity::{affinity_among, median_pairwise_distance, AffinityWeights};
use crate::predict::posterior::{posterior_from_parts, RegularizedLatentPosterior};
use crate::predict::precision::{compute_t, PrecisionSurrogate};
use crate::vb::TrainedModel;

/// The grid `2^-8, ..., 2^0`.
pub fn default_rho_grid() -> Vec<f64> {
    (-8..=0).map(|e| 2f64.powi(e)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// Median pairwise distance between training voxel rows.
    MedianDistance,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum RhoChoice {
    Fixed(f64),
    /// k-fold cross-validation over a grid on the training rows.
    CrossValidate { grid: Vec<f64>, folds: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictSettings {
    pub neighbors: usize,
    pub bandwidth: Bandwidth,
    pub rho: RhoChoice,
    pub samples: usize,
    pub seed: u64,
}

impl Default for PredictSettings {
    fn default() -> Self {
        Self {
            neighbors: 10,
            bandwidth: Bandwidth::MedianDistance,
            rho: RhoChoice::CrossValidate {
                grid: default_rho_grid(),
                folds: 5,
            },
            samples: 64,
            seed: 0,
        }
    }
}

/// Frozen pieces of a trained model needed to decode new voxel rows.
pub struct Predictor<'a> {
    pub b_mean: &'a Matrix,
    pub t: PrecisionSurrogate,
    btb: Matrix,
    pub gen: &'a MlpParams,
    pub train_latents: &'a Matrix,
    pub train_voxels: &'a Matrix,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub x_pred: Vec<f64>,
    /// Decoded mean images, one per latent draw.
    pub draws: Vec<Vec<f64>>,
    pub posterior: RegularizedLatentPosterior,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a TrainedModel, train_voxels: &'a Matrix) -> Result<Self> {
        Self::from_parts(
            &model.vb.q_b.mean,
            &model.vb.q_h.mean,
            model.vb.gamma_mean(),
            &model.gen,
            &model.train_latents,
            train_voxels,
        )
    }

    pub fn from_parts(
        b_mean: &'a Matrix,
        h_mean: &Matrix,
        gamma: f64,
        gen: &'a MlpParams,
        train_latents: &'a Matrix,
        train_voxels: &'a Matrix,
    ) -> Result<Self> {
        if train_voxels.cols() != b_mean.cols() {
            return Err(Error::shape("Predictor: voxel width", b_mean.cols(), train_voxels.cols()));
        }
        if train_latents.rows() != train_voxels.rows() || train_latents.cols() != b_mean.rows() {
            return Err(Error::shape(
                "Predictor: training latents",
                format!("{}x{}", train_voxels.rows(), b_mean.rows()),
                format!("{}x{}", train_latents.rows(), train_latents.cols()),
            ));
        }
        if gen.input_dim() != b_mean.rows() {
            return Err(Error::shape("Predictor: generative input", b_mean.rows(), gen.input_dim()));
        }
        let t = compute_t(h_mean, gamma)?;
        let btb = t.sandwich(b_mean);
        Ok(Self {
            b_mean,
            t,
            btb,
            gen,
            train_latents,
            train_voxels,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.b_mean.rows()
    }

    pub fn bandwidth(&self, b: Bandwidth) -> Result<f64> {
        match b {
            Bandwidth::MedianDistance => median_pairwise_distance(self.train_voxels),
            Bandwidth::Fixed(t) => Ok(t),
        }
    }

    pub fn posterior(&self, y_star: &[f64], aff: &AffinityWeights, rho: f64) -> Result<RegularizedLatentPosterior> {
        if y_star.len() != self.b_mean.cols() {
            return Err(Error::shape("posterior: y⋆", self.b_mean.cols(), y_star.len()));
        }
        let bty = self.t.project(self.b_mean, y_star);
        posterior_from_parts(&self.btb, &bty, self.train_latents, aff, rho)
    }

    /// Decodes `x_pred = (1/L) Σ_l g(μ + L_Σ ε_l)` with `eps.len() = L` draws.
    pub fn reconstruct_with_noise(
        &self,
        post: RegularizedLatentPosterior,
        eps: &[Vec<f64>],
    ) -> Result<Reconstruction> {
        if eps.is_empty() {
            return Err(Error::Precondition("need at least one Monte-Carlo sample".into()));
        }
        let k = self.latent_dim();
        if let Some(bad) = eps.iter().find(|e| e.len() != k) {
            return Err(Error::shape("reconstruct: noise", k, bad.len()));
        }
        let z = Matrix::from_rows(
            &eps.iter()
                .map(|e| {
                    let c = post.cov_factor().lower_mul(e);
                    post.mean.iter().zip(&c).map(|(m, d)| m + d).collect()
                })
                .collect::<Vec<Vec<f64>>>(),
        );
        let decoded = self.gen.forward_mean(&z)?;
        let d1 = decoded.cols();
        let mut x_pred = vec![0.0; d1];
        for l in 0..decoded.rows() {
            for (acc, v) in x_pred.iter_mut().zip(decoded.row(l)) {
                *acc += v;
            }
        }
        let inv = 1.0 / eps.len() as f64;
        x_pred.iter_mut().for_each(|v| *v *= inv);
        let draws = (0..decoded.rows()).map(|l| decoded.row(l).to_vec()).collect();
        Ok(Reconstruction {
            x_pred,
            draws,
            posterior: post,
        })
    }

    /// Full reconstruction of one voxel row with neighbours drawn from `candidates`.
    pub fn reconstruct_among(
        &self,
        y_star: &[f64],
        candidates: &[usize],
        neighbors: usize,
        bandwidth: f64,
        rho: f64,
        samples: usize,
        rng: &mut RngState,
    ) -> Result<Reconstruction> {
        if samples == 0 {
            return Err(Error::Precondition("need at least one Monte-Carlo sample".into()));
        }
        let aff = affinity_among(y_star, self.train_voxels, candidates, neighbors, bandwidth)?;
        let post = self.posterior(y_star, &aff, rho)?;
        let k = self.latent_dim();
        let eps: Vec<Vec<f64>> = (0..samples)
            .map(|_| rng.standard_normal(k))
            .collect::<Result<_>>()?;
        self.reconstruct_with_noise(post, &eps)
    }

    pub fn reconstruct(
        &self,
        y_star: &[f64],
        neighbors: usize,
        bandwidth: f64,
        rho: f64,
        samples: usize,
        rng: &mut RngState,
    ) -> Result<Reconstruction> {
        let all: Vec<usize> = (0..self.train_voxels.rows()).collect();
        self.reconstruct_among(y_star, &all, neighbors, bandwidth, rho, samples, rng)
    }

    /// Chooses `ρ` by k-fold cross-validation on the training rows: each
    /// held-out row is decoded with neighbours from the other folds and
    /// scored by PCC against its training image. Ties go to the smaller `ρ`.
    pub fn select_rho(
        &self,
        train_images: &Matrix,
        grid: &[f64],
        folds: usize,
        neighbors: usize,
        bandwidth: f64,
        samples: usize,
        seed: u64,
    ) -> Result<RhoSelection> {
        let n = self.train_voxels.rows();
        if grid.is_empty() {
            return Err(Error::InvalidConfig("empty rho grid".into()));
        }
        if train_images.rows() != n {
            return Err(Error::shape("select_rho: training images", n, train_images.rows()));
        }
        let fold_of = fold_assignment(n, folds)?;
        let per_row: Vec<Result<Vec<f64>>> = par::map_range(n, |i| {
            let candidates: Vec<usize> = (0..n).filter(|&j| fold_of[j] != fold_of[i]).collect();
            let y = self.train_voxels.row(i);
            grid.iter()
                .map(|&rho| {
                    let mut rng = RngState::with_stream(seed, i as u64);
                    let r = self.reconstruct_among(y, &candidates, neighbors, bandwidth, rho, samples, &mut rng)?;
                    Ok(pcc(&r.x_pred, train_images.row(i)).unwrap_or(0.0))
                })
                .collect()
        });
        let mut scores = vec![0.0; grid.len()];
        for r in per_row {
            for (s, v) in scores.iter_mut().zip(r?) {
                *s += v / n as f64;
            }
        }
        let mut best = 0;
        for (g, s) in scores.iter().enumerate() {
            let better = *s > scores[best] || (*s == scores[best] && grid[g] < grid[best]);
            if better {
                best = g;
            }
        }
        Ok(RhoSelection {
            rho: grid[best],
            grid: grid.to_vec(),
            mean_pcc: scores,
        })
    }

    /// Reconstructs every row of `y_rows` in parallel; row `i` draws from
    /// stream `i` of `seed`, so results do not depend on scheduling.
    pub fn reconstruct_rows(
        &self,
        y_rows: &Matrix,
        neighbors: usize,
        bandwidth: f64,
        rho: f64,
        samples: usize,
        seed: u64,
    ) -> Result<Matrix> {
        let rows = par::map_range(y_rows.rows(), |i| {
            let mut rng = RngState::with_stream(seed, i as u64);
            self.reconstruct(y_rows.row(i), neighbors, bandwidth, rho, samples, &mut rng)
                .map(|r| r.x_pred)
        });
        let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.gen.output_dim()));
        }
        Ok(Matrix::from_rows(&rows))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoSelection {
    pub rho: f64,
    pub grid: Vec<f64>,
    pub mean_pcc: Vec<f64>,
}

/// Contiguous near-equal folds: row `i` goes to fold `i * folds / n`.
pub fn fold_assignment(n: usize, folds: usize) -> Result<Vec<usize>> {
    if folds < 2 || n < folds {
        return Err(Error::DegenerateFolds { rows: n, folds });
    }
    Ok((0..n).map(|i| i * folds / n).collect())
}
