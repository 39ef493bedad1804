//! Minibatch estimate of the negative evidence lower bound and its gradient
//! with respect to both networks.
//!
//! For each row the shared latent is reparameterized as
//! `z = mu + sqrt(var) * eps`. The loss is
//! `KL(q(z|x) || N(0, I)) - log p(x | z) - log N(y | Bᵀz + Hᵀz̄, γ⁻¹I)`,
//! averaged over the noise samples, summed over rows. The voxel term plugs in
//! the current posterior means of `B`, `H`, `γ` and `z̄`.

use crate::error::{Error, Result};
use crate::math::{Matrix, RngState, LN_2PI};
use crate::nn::MlpParams;

/// Posterior-mean view of the conjugate factors for one minibatch.
#[derive(Clone, Copy, Debug)]
pub struct VoxelContext<'a> {
    /// `⟨B⟩`, `K x D₂`.
    pub b_mean: &'a Matrix,
    /// `⟨H⟩`, `K̄ x D₂`.
    pub h_mean: &'a Matrix,
    /// `⟨γ⟩`.
    pub gamma: f64,
    /// `⟨z̄_i⟩` for the batch rows, `n x K̄`.
    pub zbar_mean: &'a Matrix,
}

#[derive(Clone, Debug)]
pub struct ElboGrad {
    /// Negative bound on the batch: `latent_kl + image_nll + voxel_nll`.
    pub loss: f64,
    pub latent_kl: f64,
    pub image_nll: f64,
    pub voxel_nll: f64,
    pub recog: MlpParams,
    pub gen: MlpParams,
}

/// Draws `samples` noise matrices from `rng` and evaluates the gradient.
pub fn elbo_minibatch_grad(
    recog: &MlpParams,
    gen: &MlpParams,
    x: &Matrix,
    y: &Matrix,
    ctx: &VoxelContext<'_>,
    samples: usize,
    rng: &mut RngState,
) -> Result<ElboGrad> {
    if samples == 0 {
        return Err(Error::Precondition("need at least one Monte-Carlo sample".into()));
    }
    if x.rows() == 0 {
        return Err(Error::Precondition("empty minibatch".into()));
    }
    let k = recog.output_dim();
    let eps: Vec<Matrix> = (0..samples)
        .map(|_| Matrix::from_fn(x.rows(), k, |_, _| rng.normal()))
        .collect();
    elbo_minibatch_grad_with_noise(recog, gen, x, y, ctx, &eps)
}

/// Same as [`elbo_minibatch_grad`] with caller-supplied noise (`eps.len()` samples,
/// each `n x K`).
pub fn elbo_minibatch_grad_with_noise(
    recog: &MlpParams,
    gen: &MlpParams,
    x: &Matrix,
    y: &Matrix,
    ctx: &VoxelContext<'_>,
    eps: &[Matrix],
) -> Result<ElboGrad> {
    let n = x.rows();
    let k = recog.output_dim();
    check_shapes(recog, gen, x, y, ctx, eps)?;
    let inv_l = 1.0 / eps.len() as f64;

    let rc = recog.forward(x)?;
    let mu = &rc.mean;
    let lv = &rc.log_var;
    let var = rc.var();
    let sd = var.map(f64::sqrt);

    let mut d_mu = Matrix::zeros(n, k);
    let mut d_lv = Matrix::zeros(n, k);

    let mut latent_kl = 0.0;
    for idx in 0..n * k {
        let (m, v, l) = (mu.as_slice()[idx], var.as_slice()[idx], lv.as_slice()[idx]);
        latent_kl += 0.5 * (m * m + v - 1.0 - l);
        d_mu.as_mut_slice()[idx] = m;
        d_lv.as_mut_slice()[idx] = 0.5 * (v - 1.0);
    }

    let d2 = y.cols();
    let voxel_const = 0.5 * d2 as f64 * (LN_2PI - ctx.gamma.ln());
    let private = ctx.zbar_mean.matmul(ctx.h_mean);

    let mut gen_grad = gen.zeros_like();
    let mut image_nll = 0.0;
    let mut voxel_nll = 0.0;
    for e in eps {
        let mut z = mu.clone();
        for idx in 0..n * k {
            z.as_mut_slice()[idx] += sd.as_slice()[idx] * e.as_slice()[idx];
        }

        // image term
        let gc = gen.forward(&z)?;
        let mut d_mx = Matrix::zeros(n, x.cols());
        let mut d_lvx = Matrix::zeros(n, x.cols());
        for idx in 0..n * x.cols() {
            let r = x.as_slice()[idx] - gc.mean.as_slice()[idx];
            let l = gc.log_var.as_slice()[idx];
            let prec = (-l).exp();
            image_nll += inv_l * 0.5 * (LN_2PI + l + r * r * prec);
            d_mx.as_mut_slice()[idx] = -inv_l * r * prec;
            d_lvx.as_mut_slice()[idx] = inv_l * 0.5 * (1.0 - r * r * prec);
        }
        let (g, d_z_img) = gen.backward(&gc, &d_mx, &d_lvx, true);
        for (acc, t) in gen_grad.tensors_mut().into_iter().zip(g.tensors()) {
            acc.iter_mut().zip(t).for_each(|(a, b)| *a += b);
        }
        let mut d_z = d_z_img.expect("input gradient requested");

        // voxel term
        let mut resid = y.sub(&z.matmul(ctx.b_mean));
        resid.axpy(-1.0, &private);
        let sq: f64 = resid.as_slice().iter().map(|r| r * r).sum();
        voxel_nll += inv_l * (n as f64 * voxel_const + 0.5 * ctx.gamma * sq);
        d_z.axpy(-inv_l * ctx.gamma, &resid.matmul_t(ctx.b_mean));

        // through the reparameterization
        for idx in 0..n * k {
            let g = d_z.as_slice()[idx];
            d_mu.as_mut_slice()[idx] += g;
            d_lv.as_mut_slice()[idx] += g * 0.5 * sd.as_slice()[idx] * e.as_slice()[idx];
        }
    }

    let loss = latent_kl + image_nll + voxel_nll;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss("minibatch bound"));
    }
    let (recog_grad, _) = recog.backward(&rc, &d_mu, &d_lv, false);
    Ok(ElboGrad {
        loss,
        latent_kl,
        image_nll,
        voxel_nll,
        recog: recog_grad,
        gen: gen_grad,
    })
}

fn check_shapes(
    recog: &MlpParams,
    gen: &MlpParams,
    x: &Matrix,
    y: &Matrix,
    ctx: &VoxelContext<'_>,
    eps: &[Matrix],
) -> Result<()> {
    let n = x.rows();
    let k = recog.output_dim();
    if n == 0 {
        return Err(Error::Precondition("empty minibatch".into()));
    }
    if eps.is_empty() {
        return Err(Error::Precondition("need at least one Monte-Carlo sample".into()));
    }
    if x.cols() != recog.input_dim() {
        return Err(Error::shape("elbo: image width", recog.input_dim(), x.cols()));
    }
    if gen.input_dim() != k || gen.output_dim() != x.cols() {
        return Err(Error::shape(
            "elbo: generative network",
            format!("{k} -> {}", x.cols()),
            format!("{} -> {}", gen.input_dim(), gen.output_dim()),
        ));
    }
    if y.rows() != n {
        return Err(Error::shape("elbo: voxel rows", n, y.rows()));
    }
    if ctx.b_mean.shape() != (k, y.cols()) {
        return Err(Error::shape(
            "elbo: <B>",
            format!("{k}x{}", y.cols()),
            format!("{}x{}", ctx.b_mean.rows(), ctx.b_mean.cols()),
        ));
    }
    let kbar = ctx.h_mean.rows();
    if ctx.h_mean.cols() != y.cols() || ctx.zbar_mean.shape() != (n, kbar) {
        return Err(Error::shape(
            "elbo: <H>/<z̄>",
            format!("H {kbar}x{} and z̄ {n}x{kbar}", y.cols()),
            format!(
                "H {}x{} and z̄ {}x{}",
                ctx.h_mean.rows(),
                ctx.h_mean.cols(),
                ctx.zbar_mean.rows(),
                ctx.zbar_mean.cols()
            ),
        ));
    }
    if !(ctx.gamma > 0.0) {
        return Err(Error::Precondition("<gamma> must be positive".into()));
    }
    if let Some(bad) = eps.iter().find(|e| e.shape() != (n, k)) {
        return Err(Error::shape(
            "elbo: noise",
            format!("{n}x{k}"),
            format!("{}x{}", bad.rows(), bad.cols()),
        ));
    }
    Ok(())
}
