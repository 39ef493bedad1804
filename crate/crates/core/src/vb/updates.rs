//! Closed-form coordinate updates of the conjugate factors. Each update
//! replaces one factor by its optimum given all the others.

use crate::error::{Error, Result};
use crate::math::{Cholesky, GammaPosterior, Matrix};
use crate::nn::{RecognitionOutput, LOG_VAR_MIN};
use crate::par;
use crate::vb::state::{GaussianMatrixPosterior, VbState};

/// Which residual enters the rate of `q(γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GammaRate {
    /// `Σ δ_ij²` with `δ_ij` built from posterior means only.
    #[default]
    PluginMeans,
    /// `Σ ⟨δ_ij²⟩`, including the posterior covariance terms.
    ExpectedSquares,
}

impl GammaRate {
    pub fn name(self) -> &'static str {
        match self {
            GammaRate::PluginMeans => "plugin",
            GammaRate::ExpectedSquares => "expected",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "plugin" => Some(Self::PluginMeans),
            "expected" => Some(Self::ExpectedSquares),
            _ => None,
        }
    }
}

/// One conjugate factor group, for configuring sweep order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Zbar,
    B,
    H,
    Precisions,
}

impl Factor {
    pub const DEFAULT_ORDER: [Factor; 4] = [Factor::Zbar, Factor::B, Factor::H, Factor::Precisions];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Zbar => "zbar",
            Factor::B => "b",
            Factor::H => "h",
            Factor::Precisions => "precisions",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "zbar" => Some(Self::Zbar),
            "b" => Some(Self::B),
            "h" => Some(Self::H),
            "precisions" => Some(Self::Precisions),
            _ => None,
        }
    }
}

/// `⟨ZZᵀ⟩ = Σ_i (μ_i μ_iᵀ + diag(σ²_i))`, `K x K`. Variances are floored at
/// the smallest value the recognition head can emit.
pub fn expected_outer_z(recog: &RecognitionOutput) -> Result<Matrix> {
    if recog.mu.shape() != recog.var.shape() {
        return Err(Error::shape(
            "expected_outer_z",
            format!("{}x{}", recog.mu.rows(), recog.mu.cols()),
            format!("{}x{}", recog.var.rows(), recog.var.cols()),
        ));
    }
    let mut acc = recog.mu.t_matmul(&recog.mu);
    let floor = LOG_VAR_MIN.exp();
    for i in 0..recog.var.rows() {
        for (k, &v) in recog.var.row(i).iter().enumerate() {
            acc[(k, k)] += v.max(floor);
        }
    }
    Ok(acc)
}

/// Per-column Gaussian update shared by `B` and `H`: column `j` gets
/// precision `ard_j I + γ second_moment` and mean `cov_j * rhs[:, j]`.
fn column_gaussian_update(
    second_moment: &Matrix,
    ard: &[GammaPosterior],
    gamma: f64,
    rhs: &Matrix,
) -> Result<GaussianMatrixPosterior> {
    let dim = second_moment.rows();
    let d2 = rhs.cols();
    let solved = par::map_range(d2, |j| -> Result<(Vec<f64>, Matrix)> {
        let mut prec = second_moment.scaled(gamma);
        prec.add_diag(ard[j].mean());
        let ch = Cholesky::factor(&prec)?;
        Ok((ch.solve_vec(&rhs.col(j)), ch.inverse()))
    });
    let mut mean = Matrix::zeros(dim, d2);
    let mut cov = Vec::with_capacity(d2);
    for (j, r) in solved.into_iter().enumerate() {
        let (m, c) = r?;
        mean.set_col(j, &m);
        cov.push(c);
    }
    Ok(GaussianMatrixPosterior { mean, cov })
}

impl VbState {
    fn check_data(&self, recog: &RecognitionOutput, y: &Matrix) -> Result<()> {
        let n = self.n();
        if y.shape() != (n, self.d2()) {
            return Err(Error::shape(
                "VB update: Y",
                format!("{n}x{}", self.d2()),
                format!("{}x{}", y.rows(), y.cols()),
            ));
        }
        if recog.mu.shape() != (n, self.k()) || recog.var.shape() != (n, self.k()) {
            return Err(Error::shape(
                "VB update: recognition output",
                format!("{n}x{}", self.k()),
                format!("{}x{}", recog.mu.rows(), recog.mu.cols()),
            ));
        }
        if n == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(())
    }

    /// `q*(B)`: precision `⟨τ_j⟩I + ⟨γ⟩⟨ZZᵀ⟩`,
    /// mean `Σ_bj Σ_i ⟨γ⟩(y_ij − ⟨h_j⟩ᵀ⟨z̄_i⟩)⟨z_i⟩`.
    pub fn update_b(&mut self, recog: &RecognitionOutput, y: &Matrix) -> Result<()> {
        self.check_data(recog, y)?;
        let gamma = self.gamma_mean();
        let zz = expected_outer_z(recog)?;
        let resid = y.sub(&self.q_zbar.mean.matmul(&self.q_h.mean));
        let rhs = recog.mu.t_matmul(&resid).scaled(gamma);
        self.q_b = column_gaussian_update(&zz, &self.q_tau, gamma, &rhs)?;
        Ok(())
    }

    /// `q*(H)`: precision `⟨η_j⟩I + ⟨γ⟩⟨Z̄Z̄ᵀ⟩`,
    /// mean `Σ_hj Σ_i ⟨γ⟩(y_ij − ⟨b_j⟩ᵀ⟨z_i⟩)⟨z̄_i⟩`.
    pub fn update_h(&mut self, recog: &RecognitionOutput, y: &Matrix) -> Result<()> {
        self.check_data(recog, y)?;
        let gamma = self.gamma_mean();
        let zz = self.q_zbar.second_moment();
        let resid = y.sub(&recog.mu.matmul(&self.q_b.mean));
        let rhs = self.q_zbar.mean.t_matmul(&resid).scaled(gamma);
        self.q_h = column_gaussian_update(&zz, &self.q_eta, gamma, &rhs)?;
        Ok(())
    }

    /// `q*(Z̄)`: shared precision `I + ⟨γ⟩⟨HHᵀ⟩`,
    /// means `Σ_z̄ Σ_j ⟨γ⟩(y_ij − ⟨b_j⟩ᵀ⟨z_i⟩)⟨h_j⟩`.
    pub fn update_zbar(&mut self, recog: &RecognitionOutput, y: &Matrix) -> Result<()> {
        self.check_data(recog, y)?;
        let gamma = self.gamma_mean();
        let mut prec = self.q_h.outer_second_moment().scaled(gamma);
        prec.add_diag(1.0);
        let ch = Cholesky::factor(&prec)?;
        let resid = y.sub(&recog.mu.matmul(&self.q_b.mean));
        // rows of resid * Hᵀ are Σ_j r_ij h_j
        let proj = resid.matmul_t(&self.q_h.mean);
        let n = self.n();
        let rows = par::map_range(n, |i| {
            let rhs: Vec<f64> = proj.row(i).iter().map(|v| gamma * v).collect();
            ch.solve_vec(&rhs)
        });
        let mut mean = Matrix::zeros(n, self.k_bar());
        for (i, r) in rows.into_iter().enumerate() {
            mean.row_mut(i).copy_from_slice(&r);
        }
        self.q_zbar.mean = mean;
        self.q_zbar.cov = ch.inverse();
        Ok(())
    }

    /// `q*(τ)`, `q*(η)`, `q*(γ)`.
    pub fn update_precisions(&mut self, recog: &RecognitionOutput, y: &Matrix, rule: GammaRate) -> Result<()> {
        self.check_data(recog, y)?;
        let (k, k_bar, d2, n) = (self.k(), self.k_bar(), self.d2(), self.n());
        let h = self.hyper;
        let q_tau: Vec<GammaPosterior> = (0..d2)
            .map(|j| GammaPosterior {
                shape: h.tau.shape + 0.5 * k as f64,
                rate: h.tau.rate + 0.5 * self.q_b.column_second_moment(j),
            })
            .collect();
        let q_eta: Vec<GammaPosterior> = (0..d2)
            .map(|j| GammaPosterior {
                shape: h.eta.shape + 0.5 * k_bar as f64,
                rate: h.eta.rate + 0.5 * self.q_h.column_second_moment(j),
            })
            .collect();
        let sq = match rule {
            GammaRate::PluginMeans => self.plugin_residual_sq(recog, y),
            GammaRate::ExpectedSquares => self.expected_residual_sq(recog, y)?,
        };
        self.q_gamma = GammaPosterior {
            shape: h.gamma.shape + 0.5 * (n * d2) as f64,
            rate: h.gamma.rate + 0.5 * sq,
        };
        self.q_tau = q_tau;
        self.q_eta = q_eta;
        Ok(())
    }

    /// Mean residuals `y − ⟨B⟩ᵀ⟨z⟩ − ⟨H⟩ᵀ⟨z̄⟩` as an `N x D₂` matrix.
    pub fn mean_residual(&self, recog: &RecognitionOutput, y: &Matrix) -> Matrix {
        let mut r = y.sub(&recog.mu.matmul(&self.q_b.mean));
        r.axpy(-1.0, &self.q_zbar.mean.matmul(&self.q_h.mean));
        r
    }

    pub(crate) fn plugin_residual_sq(&self, recog: &RecognitionOutput, y: &Matrix) -> f64 {
        self.mean_residual(recog, y)
            .as_slice()
            .iter()
            .map(|v| v * v)
            .sum()
    }

    /// `Σ_ij ⟨δ_ij²⟩` under the factorized posterior.
    pub(crate) fn expected_residual_sq(&self, recog: &RecognitionOutput, y: &Matrix) -> Result<f64> {
        let zz = expected_outer_z(recog)?;
        let zbzb = self.q_zbar.second_moment();
        let mut var_sum = vec![0.0; self.k()];
        let floor = LOG_VAR_MIN.exp();
        for i in 0..recog.var.rows() {
            for (acc, &v) in var_sum.iter_mut().zip(recog.var.row(i)) {
                *acc += v.max(floor);
            }
        }
        let n = self.n() as f64;
        let mut extra = 0.0;
        for j in 0..self.d2() {
            let b = self.q_b.mean.col(j);
            let hj = self.q_h.mean.col(j);
            extra += trace_product(&self.q_b.cov[j], &zz);
            extra += b.iter().zip(&var_sum).map(|(bk, s)| bk * bk * s).sum::<f64>();
            extra += trace_product(&self.q_h.cov[j], &zbzb);
            let sh = self.q_zbar.cov.matvec(&hj);
            extra += n * hj.iter().zip(&sh).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.plugin_residual_sq(recog, y) + extra)
    }

    /// Runs the updates in `order`.
    pub fn sweep(&mut self, recog: &RecognitionOutput, y: &Matrix, order: &[Factor], rule: GammaRate) -> Result<()> {
        for f in order {
            match f {
                Factor::Zbar => self.update_zbar(recog, y)?,
                Factor::B => self.update_b(recog, y)?,
                Factor::H => self.update_h(recog, y)?,
                Factor::Precisions => self.update_precisions(recog, y, rule)?,
            }
        }
        Ok(())
    }
}

/// `tr(A B)` for square matrices of equal size.
pub(crate) fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.rows();
    let mut t = 0.0;
    for i in 0..n {
        for k in 0..n {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}
