//! Recognition and generative networks with hand-written backprop, the
//! reparameterized sampler, and the minibatch optimizers.

mod checkpoint;
mod elbo;
mod mlp;
mod optim;

pub use checkpoint::{load_mlp, read_f64s, read_matrix, save_mlp, write_f64s, CheckpointMeta};
pub use elbo::{elbo_minibatch_grad, elbo_minibatch_grad_with_noise, ElboGrad, VoxelContext};
pub use mlp::{
    forward_recognition, Dense, ForwardCache, MeanActivation, MlpParams, RecognitionOutput,
    VarianceMode, LOG_VAR_MAX, LOG_VAR_MIN,
};
pub use optim::{OptimizerKind, OptimizerState};

use crate::error::{Error, Result};
use crate::math::RngState;

/// `mu + sqrt(var) * eps` with a fresh standard-normal `eps`.
pub fn reparameterize(mu: &[f64], var: &[f64], rng: &mut RngState) -> Result<Vec<f64>> {
    let eps = rng.standard_normal(mu.len())?;
    reparameterize_with_noise(mu, var, &eps)
}

pub fn reparameterize_with_noise(mu: &[f64], var: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != var.len() || mu.len() != eps.len() {
        return Err(Error::shape("reparameterize", mu.len(), format!("{}/{}", var.len(), eps.len())));
    }
    mu.iter()
        .zip(var)
        .zip(eps)
        .enumerate()
        .map(|(k, ((&m, &v), &e))| {
            if v > 0.0 {
                Ok(m + v.sqrt() * e)
            } else {
                Err(Error::NonPositiveVariance { index: k, value: v })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reparameterize_examples() {
        assert_eq!(reparameterize_with_noise(&[1.5, -2.0], &[3.0, 0.1], &[0.0, 0.0]).unwrap(), [1.5, -2.0]);
        assert_eq!(reparameterize_with_noise(&[0.0], &[4.0], &[1.0]).unwrap(), [2.0]);
        assert!(reparameterize_with_noise(&[0.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn reparameterize_moments() {
        let mut rng = RngState::new(21);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| reparameterize(&[1.0], &[0.25], &mut rng).unwrap()[0])
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((var - 0.25).abs() < 0.01, "var {var}");
    }
}
