use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gamma distribution in shape/rate form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaPosterior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPosterior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::Precondition(format!(
                "gamma parameters must be positive and finite (shape {shape}, rate {rate})"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// `E[ln x]`.
    pub fn mean_log(&self) -> f64 {
        digamma(self.shape) - self.rate.ln()
    }

    /// `KL(self || prior)`.
    pub fn kl_to(&self, prior: &GammaPosterior) -> f64 {
        let (a, b) = (self.shape, self.rate);
        let (a0, b0) = (prior.shape, prior.rate);
        (a - a0) * digamma(a) - ln_gamma(a) + ln_gamma(a0) + a0 * (b.ln() - b0.ln())
            + a * (b0 - b) / b
    }
}

/// `KL(N(mu, diag(var)) || N(0, I))`.
pub fn gaussian_kl_to_standard(mu: &[f64], var: &[f64]) -> Result<f64> {
    if mu.len() != var.len() {
        return Err(Error::shape("gaussian_kl_to_standard", mu.len(), var.len()));
    }
    let mut acc = 0.0;
    for (k, (&m, &v)) in mu.iter().zip(var).enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveVariance { index: k, value: v });
        }
        acc += 1.0 + v.ln() - m * m - v;
    }
    Ok(-0.5 * acc)
}
