//! Image reconstruction from a new voxel vector: kNN affinity, the
//! posterior-regularized latent Gaussian, and Monte-Carlo decoding.

mod affinity;
mod posterior;
mod precision;
mod reconstruct;

pub use affinity::{affinity, affinity_among, median_pairwise_distance, AffinityWeights};
pub use posterior::{posterior_from_parts, posterior_latent, RegularizedLatentPosterior};
pub use precision::{compute_t, PrecisionSurrogate};
pub use reconstruct::{
    default_rho_grid, fold_assignment, Bandwidth, PredictSettings, Predictor, Reconstruction, RhoChoice,
    RhoSelection,
};
