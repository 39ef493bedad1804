//! Two-view datasets on disk, the synthetic generator and voxel standardization.

mod dataset;
mod synthetic;
mod zscore;

pub use dataset::{load_dataset, read_matrix_csv, save_dataset, write_matrix_csv, Manifest, PixelRange, TwoViewDataset};
pub use synthetic::{
    generate_synthetic, load_ground_truth, save_ground_truth, GenerativeMap, MapKind, SyntheticConfig,
    SyntheticGroundTruth,
};
pub use zscore::{fit_voxel_transform, zscore_voxels, VoxelTransform};
