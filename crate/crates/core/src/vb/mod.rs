//! Conjugate mean-field updates for the voxel model, bound bookkeeping and
//! the hybrid training loop.

mod bound;
mod persist;
mod state;
mod train;
mod updates;

pub use bound::{elbo, elbo_with_noise, image_loglik_with_noise, ElboComponents, VoxelBound};
pub use persist::{load_model, save_model};
pub use state::{GaussianMatrixPosterior, Hyperparameters, PrivateLatentPosterior, VbState};
pub use train::{log_to_csv, train, EpochRecord, TrainConfig, TrainOutcome, TrainedModel, FULL_BATCH_BELOW};
pub use updates::{expected_outer_z, Factor, GammaRate};
