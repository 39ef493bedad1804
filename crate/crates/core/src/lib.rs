//! Deep generative multiview model: images and voxel responses share a
//! latent code. Images are modeled by a deep Gaussian network, voxels by a
//! Bayesian linear-Gaussian model with low-rank noise through private latents.
//! Training alternates minibatch gradient steps on the networks with
//! closed-form mean-field updates; prediction decodes images from voxels
//! through a kNN-regularized latent posterior.

pub mod data;
pub mod error;
pub mod eval;
pub mod kv;
pub mod math;
pub mod nn;
pub mod par;
pub mod predict;
pub mod vb;

pub use error::{Error, Result};
