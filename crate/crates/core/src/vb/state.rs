use crate::error::{Error, Result};
use crate::math::{GammaPosterior, Matrix, RngState};

/// Gamma prior hyperparameters for the ARD precisions and the noise precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparameters {
    pub tau: GammaPosterior,
    pub eta: GammaPosterior,
    pub gamma: GammaPosterior,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        let unit = GammaPosterior { shape: 1.0, rate: 1.0 };
        Self {
            tau: unit,
            eta: unit,
            gamma: unit,
        }
    }
}

/// Column-factorized Gaussian over a projection matrix (`B` or `H`):
/// column `j` has mean `mean[:, j]` and covariance `cov[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMatrixPosterior {
    pub mean: Matrix,
    pub cov: Vec<Matrix>,
}

impl GaussianMatrixPosterior {
    pub fn dim(&self) -> usize {
        self.mean.rows()
    }

    pub fn columns(&self) -> usize {
        self.mean.cols()
    }

    /// `⟨w_jᵀ w_j⟩ = |mean_j|² + tr(cov_j)`.
    pub fn column_second_moment(&self, j: usize) -> f64 {
        let m = self.mean.col(j);
        m.iter().map(|v| v * v).sum::<f64>() + self.cov[j].trace()
    }

    /// `Σ_j ⟨w_j w_jᵀ⟩`, e.g. `⟨HHᵀ⟩`.
    pub fn outer_second_moment(&self) -> Matrix {
        let mut acc = self.mean.matmul_t(&self.mean);
        for c in &self.cov {
            acc.add_assign(c);
        }
        acc
    }
}

/// Gaussian over the private latents; one covariance shared by all rows.
/// `mean` is `N x K̄` (row `i` is `⟨z̄_i⟩`).
#[derive(Clone, Debug, PartialEq)]
pub struct PrivateLatentPosterior {
    pub mean: Matrix,
    pub cov: Matrix,
}

impl PrivateLatentPosterior {
    /// `⟨Z̄Z̄ᵀ⟩ = Σ_i (⟨z̄_i⟩⟨z̄_i⟩ᵀ + Σ_z̄)`.
    pub fn second_moment(&self) -> Matrix {
        let mut acc = self.mean.t_matmul(&self.mean);
        acc.axpy(self.mean.rows() as f64, &self.cov);
        acc
    }
}

/// Conjugate mean-field factors of the voxel model.
#[derive(Clone, Debug, PartialEq)]
pub struct VbState {
    pub q_b: GaussianMatrixPosterior,
    pub q_h: GaussianMatrixPosterior,
    pub q_zbar: PrivateLatentPosterior,
    pub q_tau: Vec<GammaPosterior>,
    pub q_eta: Vec<GammaPosterior>,
    pub q_gamma: GammaPosterior,
    pub hyper: Hyperparameters,
}

impl VbState {
    /// Cold start: projection means ~ N(0, 0.01), identity covariances,
    /// precisions at their priors, private latents at the prior.
    pub fn init(
        k: usize,
        k_bar: usize,
        n: usize,
        d2: usize,
        hyper: Hyperparameters,
        rng: &mut RngState,
    ) -> Result<Self> {
        if k == 0 || k_bar == 0 || d2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "latent and voxel dimensions must be positive (K={k}, K̄={k_bar}, D₂={d2})"
            )));
        }
        let mut proj = |rows: usize| GaussianMatrixPosterior {
            mean: Matrix::from_fn(rows, d2, |_, _| 0.1 * rng.normal()),
            cov: vec![Matrix::identity(rows); d2],
        };
        let q_b = proj(k);
        let q_h = proj(k_bar);
        Ok(Self {
            q_b,
            q_h,
            q_zbar: PrivateLatentPosterior {
                mean: Matrix::zeros(n, k_bar),
                cov: Matrix::identity(k_bar),
            },
            q_tau: vec![hyper.tau; d2],
            q_eta: vec![hyper.eta; d2],
            q_gamma: hyper.gamma,
            hyper,
        })
    }

    pub fn k(&self) -> usize {
        self.q_b.dim()
    }

    pub fn k_bar(&self) -> usize {
        self.q_h.dim()
    }

    pub fn d2(&self) -> usize {
        self.q_b.columns()
    }

    pub fn n(&self) -> usize {
        self.q_zbar.mean.rows()
    }

    pub fn gamma_mean(&self) -> f64 {
        self.q_gamma.mean()
    }

    pub fn zbar_rows(&self, rows: &[usize]) -> Matrix {
        self.q_zbar.mean.select_rows(rows)
    }

    pub fn is_finite(&self) -> bool {
        self.q_b.mean.is_finite()
            && self.q_h.mean.is_finite()
            && self.q_zbar.mean.is_finite()
            && self.q_gamma.mean().is_finite()
    }
}
