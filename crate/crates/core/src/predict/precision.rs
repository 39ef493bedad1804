use crate::error::{Error, Result};
use crate::math::{dot, Cholesky, Matrix};

/// `T = γI − γ² Hᵀ (I + γ H Hᵀ)⁻¹ H = (HᵀH + γ⁻¹I)⁻¹`, kept in factored form
/// so only the `K̄ x K̄` inner system is ever factorized.
#[derive(Clone, Debug)]
pub struct PrecisionSurrogate {
    gamma: f64,
    h: Matrix,
    inner: Cholesky,
}

/// Builds `T` from the posterior mean of `H` (`K̄ x D₂`) and `⟨γ⟩`.
pub fn compute_t(h_mean: &Matrix, gamma: f64) -> Result<PrecisionSurrogate> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Precondition(format!("gamma must be positive, got {gamma}")));
    }
    let mut inner = h_mean.matmul_t(h_mean).scaled(gamma);
    inner.add_diag(1.0);
    Ok(PrecisionSurrogate {
        gamma,
        h: h_mean.clone(),
        inner: Cholesky::factor(&inner)?,
    })
}

impl PrecisionSurrogate {
    pub fn dim(&self) -> usize {
        self.h.cols()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `T v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "T apply length mismatch");
        let hv = self.h.matvec(v);
        let w = self.inner.solve_vec(&hv);
        let g2 = self.gamma * self.gamma;
        let back = self.h.t_matvec(&w);
        v.iter().zip(&back).map(|(a, b)| self.gamma * a - g2 * b).collect()
    }

    /// `B T y` for `B` of shape `K x D₂`.
    pub fn project(&self, b: &Matrix, y: &[f64]) -> Vec<f64> {
        let ty = self.apply(y);
        b.matvec(&ty)
    }

    /// `B T Bᵀ`, `K x K`.
    pub fn sandwich(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.cols(), self.dim(), "sandwich width mismatch");
        // B T Bᵀ = γ BBᵀ − γ² (H Bᵀ)ᵀ inner⁻¹ (H Bᵀ)
        let hb = self.h.matmul_t(b);
        let solved = self.inner.solve(&hb);
        let mut out = b.matmul_t(b).scaled(self.gamma);
        out.axpy(-self.gamma * self.gamma, &hb.t_matmul(&solved));
        out.symmetrize();
        out
    }

    /// Dense `D₂ x D₂` materialization (debugging and tests).
    pub fn to_dense(&self) -> Matrix {
        let d = self.dim();
        let mut t = Matrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for c in 0..d {
            e[c] = 1.0;
            t.set_col(c, &self.apply(&e));
            e[c] = 0.0;
        }
        t
    }

    /// `vᵀ T v`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_h_gives_scaled_identity() {
        let t = compute_t(&Matrix::zeros(2, 4), 1.0).unwrap();
        assert_eq!(t.to_dense(), Matrix::identity(4));
    }

    #[test]
    fn scalar_case() {
        let t = compute_t(&Matrix::from_rows(&[vec![2.0]]), 1.0).unwrap();
        let v = t.to_dense()[(0, 0)];
        assert!((v - 0.2).abs() < 1e-15);
        assert!((v - 1.0 / (4.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        assert!(compute_t(&Matrix::zeros(1, 1), 0.0).is_err());
    }

    #[test]
    fn sandwich_and_project_match_dense() {
        let h = Matrix::from_fn(2, 5, |r, c| ((r * 5 + c) as f64 * 0.37).sin());
        let b = Matrix::from_fn(3, 5, |r, c| ((r + 2 * c) as f64 * 0.21).cos());
        let t = compute_t(&h, 2.5).unwrap();
        let dense = t.to_dense();
        let direct = b.matmul(&dense).matmul_t(&b);
        assert!(t.sandwich(&b).sub(&direct).max_abs() < 1e-12);
        let y = [0.3, -1.0, 0.5, 2.0, -0.7];
        let p = t.project(&b, &y);
        let pd = b.matmul(&dense).matvec(&y);
        assert!(p.iter().zip(&pd).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
