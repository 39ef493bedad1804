use crate::error::{Error, Result};
use crate::math::{Cholesky, Matrix};
use crate::predict::affinity::AffinityWeights;
use crate::predict::precision::PrecisionSurrogate;

/// Gaussian `p(z⋆ | y⋆)` after posterior regularization toward the
/// neighbours' training latents.
#[derive(Clone, Debug)]
pub struct RegularizedLatentPosterior {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub rho: f64,
    chol: Cholesky,
}

impl RegularizedLatentPosterior {
    /// Lower Cholesky factor of the covariance, for sampling.
    pub fn cov_factor(&self) -> &Cholesky {
        &self.chol
    }
}

/// `Σ = [B̄TB̄ᵀ + (1 + ρΣs_i) I]⁻¹`, `μ = Σ [B̄Ty⋆ + ρ Σ s_i ⟨z_i⟩]`.
///
/// `b_mean` is `K x D₂`, `latents` holds `⟨z_i⟩` for training rows (`N x K`).
pub fn posterior_latent(
    y_star: &[f64],
    b_mean: &Matrix,
    t: &PrecisionSurrogate,
    latents: &Matrix,
    aff: &AffinityWeights,
    rho: f64,
) -> Result<RegularizedLatentPosterior> {
    if y_star.len() != b_mean.cols() || t.dim() != b_mean.cols() {
        return Err(Error::shape("posterior_latent: y⋆", b_mean.cols(), y_star.len()));
    }
    let btb = t.sandwich(b_mean);
    let bty = t.project(b_mean, y_star);
    posterior_from_parts(&btb, &bty, latents, aff, rho)
}

/// Same as [`posterior_latent`] with `B̄TB̄ᵀ` and `B̄Ty⋆` precomputed.
pub fn posterior_from_parts(
    btb: &Matrix,
    bty: &[f64],
    latents: &Matrix,
    aff: &AffinityWeights,
    rho: f64,
) -> Result<RegularizedLatentPosterior> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Precondition(format!("rho must be non-negative, got {rho}")));
    }
    let k = btb.rows();
    if latents.cols() != k {
        return Err(Error::shape("posterior_latent: latents", k, latents.cols()));
    }
    let mut prec = btb.clone();
    prec.add_diag(1.0 + rho * aff.total());
    let chol_prec = Cholesky::factor(&prec)?;
    let mut rhs = bty.to_vec();
    for (&i, &s) in aff.indices.iter().zip(&aff.weights) {
        for (r, z) in rhs.iter_mut().zip(latents.row(i)) {
            *r += rho * s * z;
        }
    }
    let mean = chol_prec.solve_vec(&rhs);
    let cov = chol_prec.inverse();
    let chol = Cholesky::factor(&cov)?;
    Ok(RegularizedLatentPosterior { mean, cov, rho, chol })
}
