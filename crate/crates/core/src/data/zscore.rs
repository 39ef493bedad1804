use crate::data::dataset::{read_matrix_csv, write_matrix_csv, TwoViewDataset};
use crate::error::{Error, Result};
use crate::math::Matrix;
use std::path::Path;

/// Column standardization fitted on the training split.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelTransform {
    /// Indices (into the input columns) that were kept.
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl VoxelTransform {
    pub fn apply(&self, y: &Matrix) -> Matrix {
        let mut out = y.select_cols(&self.kept);
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    /// Three rows: kept column index, mean, standard deviation.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut data: Vec<f64> = self.kept.iter().map(|&j| j as f64).collect();
        data.extend(&self.mean);
        data.extend(&self.std);
        write_matrix_csv(path, &Matrix::new(3, self.kept.len(), data)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m = read_matrix_csv(path, None)?;
        if m.rows() != 3 {
            return Err(Error::Parse {
                file: path.display().to_string(),
                detail: format!("expected 3 rows, found {}", m.rows()),
            });
        }
        Ok(Self {
            kept: m.row(0).iter().map(|&v| v as usize).collect(),
            mean: m.row(1).to_vec(),
            std: m.row(2).to_vec(),
        })
    }
}

/// Fits per-voxel mean and (population) standard deviation on the training rows.
/// Columns with zero training variance are dropped.
pub fn fit_voxel_transform(y: &Matrix, train: &[usize]) -> Result<VoxelTransform> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let ytr = y.select_rows(train);
    let n = train.len() as f64;
    let mean = ytr.column_means();
    let mut t = VoxelTransform {
        kept: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (j, &m) in mean.iter().enumerate() {
        let var = (0..ytr.rows()).map(|i| (ytr.row(i)[j] - m).powi(2)).sum::<f64>() / n;
        if var > 1e-24 * m.abs().max(1.0).powi(2) {
            t.kept.push(j);
            t.mean.push(m);
            t.std.push(var.sqrt());
        }
    }
    Ok(t)
}

/// Standardizes voxels with training-split statistics, dropping constant
/// columns and recording their original indices in the manifest.
pub fn zscore_voxels(ds: &TwoViewDataset) -> Result<(TwoViewDataset, VoxelTransform)> {
    let t = fit_voxel_transform(&ds.y, &ds.train)?;
    let mut out = ds.clone();
    out.y = t.apply(&ds.y);
    let kept: std::collections::HashSet<usize> = t.kept.iter().copied().collect();
    // indices are relative to this dataset's columns; map earlier drops back
    let original = original_indices(ds.manifest.d2, &ds.manifest.dropped_voxels);
    for j in (0..ds.y.cols()).filter(|j| !kept.contains(j)) {
        log::warn!("dropping voxel {} with zero training variance", original[j]);
        out.manifest.dropped_voxels.push(original[j]);
    }
    out.manifest.dropped_voxels.sort_unstable();
    out.manifest.d2 = t.kept.len();
    out.validate()?;
    Ok((out, t))
}

/// Original index of each current column given previously dropped ones.
fn original_indices(d2: usize, dropped: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(d2);
    let mut j = 0;
    while out.len() < d2 {
        if !dropped.contains(&j) {
            out.push(j);
        }
        j += 1;
    }
    out
}
