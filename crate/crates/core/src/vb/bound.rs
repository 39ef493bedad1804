use crate::error::{Error, Result};
use crate::math::{gaussian_kl_to_standard, Cholesky, Matrix, RngState, LN_2PI};
use crate::nn::{forward_recognition, MlpParams, RecognitionOutput};
use crate::vb::state::{GaussianMatrixPosterior, VbState};

/// The voxel-side part of the bound with `q(Z)` held fixed. Everything here
/// is analytic; the conjugate updates are coordinate ascent on `total()`
/// (exactly so when `q(γ)` uses [`GammaRate::ExpectedSquares`](crate::vb::GammaRate)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelBound {
    /// `E_q[log p(Y | Z, Z̄, B, H, γ)]`.
    pub expected_loglik: f64,
    pub kl_b: f64,
    pub kl_h: f64,
    pub kl_zbar: f64,
    pub kl_tau: f64,
    pub kl_eta: f64,
    pub kl_gamma: f64,
}

impl VoxelBound {
    pub fn kl_sum(&self) -> f64 {
        self.kl_b + self.kl_h + self.kl_zbar + self.kl_tau + self.kl_eta + self.kl_gamma
    }

    pub fn total(&self) -> f64 {
        self.expected_loglik - self.kl_sum()
    }
}

/// Full bound: `−Σ KL(q(z_i)||p(z_i)) + E[log p(X|Z)] + voxel bound`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboComponents {
    /// `Σ_i KL(q(z_i | x_i) || N(0, I))` (the negated latent-prior term).
    pub latent_kl: f64,
    /// Monte-Carlo estimate of `Σ_i E_q[log p_θ(x_i | z_i)]`.
    pub image_loglik: f64,
    pub voxel: VoxelBound,
}

impl ElboComponents {
    pub fn total(&self) -> f64 {
        -self.latent_kl + self.image_loglik + self.voxel.total()
    }
}

fn projection_kl(q: &GaussianMatrixPosterior, ard: &[crate::math::GammaPosterior]) -> Result<f64> {
    let dim = q.dim() as f64;
    let mut kl = 0.0;
    for (j, a) in ard.iter().enumerate() {
        let log_det = Cholesky::factor(&q.cov[j])?.log_det();
        kl += 0.5 * (a.mean() * q.column_second_moment(j) - dim - log_det - dim * a.mean_log());
    }
    Ok(kl)
}

impl VbState {
    pub fn voxel_bound(&self, recog: &RecognitionOutput, y: &Matrix) -> Result<VoxelBound> {
        if y.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        let (n, d2) = (self.n() as f64, self.d2() as f64);
        let sq = self.expected_residual_sq(recog, y)?;
        let g = self.q_gamma;
        let expected_loglik = 0.5 * n * d2 * (g.mean_log() - LN_2PI) - 0.5 * g.mean() * sq;

        let kl_b = projection_kl(&self.q_b, &self.q_tau)?;
        let kl_h = projection_kl(&self.q_h, &self.q_eta)?;

        let kb = self.k_bar() as f64;
        let zcov = &self.q_zbar.cov;
        let log_det = Cholesky::factor(zcov)?.log_det();
        let mean_sq: f64 = self.q_zbar.mean.as_slice().iter().map(|v| v * v).sum();
        let kl_zbar = 0.5 * n * (zcov.trace() - kb - log_det) + 0.5 * mean_sq;

        let h = self.hyper;
        let kl_tau = self.q_tau.iter().map(|q| q.kl_to(&h.tau)).sum();
        let kl_eta = self.q_eta.iter().map(|q| q.kl_to(&h.eta)).sum();
        let kl_gamma = self.q_gamma.kl_to(&h.gamma);
        Ok(VoxelBound {
            expected_loglik,
            kl_b,
            kl_h,
            kl_zbar,
            kl_tau,
            kl_eta,
            kl_gamma,
        })
    }
}

/// Full bound estimate with noise drawn from `rng` (`samples` draws per row).
pub fn elbo(
    state: &VbState,
    recog: &MlpParams,
    gen: &MlpParams,
    x: &Matrix,
    y: &Matrix,
    samples: usize,
    rng: &mut RngState,
) -> Result<ElboComponents> {
    if samples == 0 {
        return Err(Error::Precondition("need at least one Monte-Carlo sample".into()));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let eps: Vec<Matrix> = (0..samples)
        .map(|_| Matrix::from_fn(x.rows(), recog.output_dim(), |_, _| rng.normal()))
        .collect();
    elbo_with_noise(state, recog, gen, x, y, &eps)
}

pub fn elbo_with_noise(
    state: &VbState,
    recog: &MlpParams,
    gen: &MlpParams,
    x: &Matrix,
    y: &Matrix,
    eps: &[Matrix],
) -> Result<ElboComponents> {
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if y.rows() != x.rows() {
        return Err(Error::shape("elbo: voxel rows", x.rows(), y.rows()));
    }
    if eps.is_empty() {
        return Err(Error::Precondition("need at least one Monte-Carlo sample".into()));
    }
    let rec = forward_recognition(recog, x)?;
    let mut latent_kl = 0.0;
    for i in 0..x.rows() {
        latent_kl += gaussian_kl_to_standard(rec.mu.row(i), rec.var.row(i))?;
    }
    let image_loglik = image_loglik_with_noise(&rec, gen, x, eps)?;
    let voxel = state.voxel_bound(&rec, y)?;
    let out = ElboComponents {
        latent_kl,
        image_loglik,
        voxel,
    };
    if !out.total().is_finite() {
        return Err(Error::NonFiniteLoss("evidence lower bound"));
    }
    Ok(out)
}

/// `(1/L) Σ_l Σ_i log N(x_i | μ_x(z_i^l), diag σ²_x(z_i^l))`.
pub fn image_loglik_with_noise(
    rec: &RecognitionOutput,
    gen: &MlpParams,
    x: &Matrix,
    eps: &[Matrix],
) -> Result<f64> {
    let inv_l = 1.0 / eps.len() as f64;
    let sd = rec.var.map(f64::sqrt);
    let mut total = 0.0;
    for e in eps {
        if e.shape() != rec.mu.shape() {
            return Err(Error::shape(
                "image_loglik: noise",
                format!("{}x{}", rec.mu.rows(), rec.mu.cols()),
                format!("{}x{}", e.rows(), e.cols()),
            ));
        }
        let mut z = rec.mu.clone();
        for idx in 0..z.as_slice().len() {
            z.as_mut_slice()[idx] += sd.as_slice()[idx] * e.as_slice()[idx];
        }
        let gc = gen.forward(&z)?;
        for idx in 0..x.as_slice().len() {
            let r = x.as_slice()[idx] - gc.mean.as_slice()[idx];
            let l = gc.log_var.as_slice()[idx];
            total -= inv_l * 0.5 * (LN_2PI + l + r * r * (-l).exp());
        }
    }
    Ok(total)
}
