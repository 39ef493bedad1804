use crate::error::{Error, Result};
use crate::math::{Cholesky, Matrix};
use crate::par;
use crate::predict::fold_assignment;

pub const DEFAULT_RIDGE_PENALTY: f64 = 1.0;

/// Cross-validated encoding performance of every voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelScreeningReport {
    pub r2: Vec<f64>,
    pub selected: Vec<usize>,
    pub folds: usize,
}

impl VoxelScreeningReport {
    pub fn from_r2(r2: Vec<f64>, folds: usize) -> Self {
        let selected = r2
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > 0.0)
            .map(|(j, _)| j)
            .collect();
        Self { r2, selected, folds }
    }

    pub fn is_selected(&self, voxel: usize) -> bool {
        self.selected.binary_search(&voxel).is_ok()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("voxel,r2,selected\n");
        for (j, r) in self.r2.iter().enumerate() {
            s.push_str(&format!("{j},{r:.17e},{}\n", u8::from(self.is_selected(j))));
        }
        s
    }
}

/// Ridge screening with the default penalty.
pub fn screen_voxels(x: &Matrix, y: &Matrix, folds: usize) -> Result<VoxelScreeningReport> {
    screen_voxels_with_penalty(x, y, folds, DEFAULT_RIDGE_PENALTY)
}

/// Out-of-fold R² of a per-voxel ridge regression from pixels to voxel
/// amplitude. The intercept is left unpenalized by centering on the training
/// fold, and R² is pooled over all held-out predictions.
pub fn screen_voxels_with_penalty(
    x: &Matrix,
    y: &Matrix,
    folds: usize,
    penalty: f64,
) -> Result<VoxelScreeningReport> {
    if x.rows() != y.rows() {
        return Err(Error::shape("screen_voxels rows", x.rows(), y.rows()));
    }
    if !(penalty > 0.0) {
        return Err(Error::InvalidConfig(format!("ridge penalty must be positive, got {penalty}")));
    }
    let n = x.rows();
    let d2 = y.cols();
    let fold_of = fold_assignment(n, folds)?;
    let mut predicted = Matrix::zeros(n, d2);

    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let (xc, x_mean) = centered(&x.select_rows(&train));
        let (yc, y_mean) = centered(&y.select_rows(&train));
        let mut x_test = x.select_rows(&test);
        for i in 0..x_test.rows() {
            for (v, m) in x_test.row_mut(i).iter_mut().zip(&x_mean) {
                *v -= m;
            }
        }

        let pred = if xc.cols() <= xc.rows() {
            let mut gram = xc.t_matmul(&xc);
            gram.add_diag(penalty);
            let chol = Cholesky::factor(&gram)?;
            let rhs = xc.t_matmul(&yc);
            let weights = solve_columns(&chol, &rhs);
            x_test.matmul(&weights)
        } else {
            let mut kernel = xc.matmul_t(&xc);
            kernel.add_diag(penalty);
            let chol = Cholesky::factor(&kernel)?;
            let dual = solve_columns(&chol, &yc);
            x_test.matmul_t(&xc).matmul(&dual)
        };
        for (t, &i) in test.iter().enumerate() {
            for ((out, p), m) in predicted.row_mut(i).iter_mut().zip(pred.row(t)).zip(&y_mean) {
                *out = p + m;
            }
        }
    }

    let r2 = par::map_range(d2, |j| {
        let truth = y.col(j);
        let mean = truth.iter().sum::<f64>() / n as f64;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for (i, t) in truth.iter().enumerate() {
            ss_res += (t - predicted.row(i)[j]).powi(2);
            ss_tot += (t - mean).powi(2);
        }
        if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else {
            0.0
        }
    });
    Ok(VoxelScreeningReport::from_r2(r2, folds))
}

fn centered(m: &Matrix) -> (Matrix, Vec<f64>) {
    let means = m.column_means();
    let mut out = m.clone();
    for i in 0..out.rows() {
        for (v, mu) in out.row_mut(i).iter_mut().zip(&means) {
            *v -= mu;
        }
    }
    (out, means)
}

fn solve_columns(chol: &Cholesky, rhs: &Matrix) -> Matrix {
    let cols = par::map_range(rhs.cols(), |j| chol.solve_vec(&rhs.col(j)));
    let mut out = Matrix::zeros(rhs.rows(), rhs.cols());
    for (j, c) in cols.iter().enumerate() {
        out.set_col(j, c);
    }
    out
}
