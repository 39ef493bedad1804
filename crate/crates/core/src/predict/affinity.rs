use crate::error::{Error, Result};
use crate::math::{sq_dist, Matrix};
use crate::par;

/// Heat-kernel weights on the `k` nearest training rows in voxel space.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityWeights {
    /// Training row ids, nearest first.
    pub indices: Vec<usize>,
    /// `s_i = exp(−‖y⋆ − y_i‖² / 2t²)`, aligned with `indices`.
    pub weights: Vec<f64>,
    pub bandwidth: f64,
    pub k: usize,
}

impl AffinityWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// kNN affinity against all rows of `y_train`.
pub fn affinity(y_star: &[f64], y_train: &Matrix, k: usize, t: f64) -> Result<AffinityWeights> {
    let all: Vec<usize> = (0..y_train.rows()).collect();
    affinity_among(y_star, y_train, &all, k, t)
}

/// kNN affinity restricted to `candidates` (row ids of `y_train`). Ties in
/// distance go to the lower row id.
pub fn affinity_among(
    y_star: &[f64],
    y_train: &Matrix,
    candidates: &[usize],
    k: usize,
    t: f64,
) -> Result<AffinityWeights> {
    if candidates.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if y_star.len() != y_train.cols() {
        return Err(Error::shape("affinity", y_train.cols(), y_star.len()));
    }
    if k == 0 || k > candidates.len() {
        return Err(Error::Precondition(format!(
            "need 1 <= k <= {} neighbours, got {k}",
            candidates.len()
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("bandwidth must be positive, got {t}")));
    }
    let mut dist: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&i| (sq_dist(y_star, y_train.row(i)), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.truncate(k);
    let scale = 2.0 * t * t;
    Ok(AffinityWeights {
        indices: dist.iter().map(|d| d.1).collect(),
        // floored so that every selected neighbour keeps a positive weight
        weights: dist
            .iter()
            .map(|d| (-d.0 / scale).exp().max(f64::MIN_POSITIVE))
            .collect(),
        bandwidth: t,
        k,
    })
}

/// Median Euclidean distance over all pairs of rows.
pub fn median_pairwise_distance(y: &Matrix) -> Result<f64> {
    let n = y.rows();
    if n < 2 {
        return Err(Error::Precondition("median distance needs at least two rows".into()));
    }
    let mut d: Vec<f64> = par::map_range(n, |i| {
        ((i + 1)..n)
            .map(|j| sq_dist(y.row(i), y.row(j)).sqrt())
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if med > 0.0 {
        Ok(med)
    } else {
        Err(Error::Precondition("training voxels are all identical".into()))
    }
}
