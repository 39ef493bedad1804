//! Reconstruction quality metrics and voxel screening.

mod metrics;
mod screening;
mod ssim;

pub use metrics::{mse, pcc, Aggregate, MetricReport};
pub use screening::{screen_voxels, screen_voxels_with_penalty, VoxelScreeningReport, DEFAULT_RIDGE_PENALTY};
pub use ssim::{gaussian_window, ssim};
