//! Dense linear algebra, probability primitives and seeded randomness.

mod cholesky;
mod matrix;
mod prob;
mod rng;

pub use cholesky::{cholesky_solve, spd_inverse, Cholesky};
pub use matrix::{axpy, dot, sq_dist, Matrix};
pub use prob::{gaussian_kl_to_standard, GammaPosterior, LN_2PI};
pub use rng::RngState;
