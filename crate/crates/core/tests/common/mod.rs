#![allow(dead_code)]

use dgmm_core::math::{GammaPosterior, Matrix, RngState};
use dgmm_core::nn::RecognitionOutput;
use dgmm_core::vb::{Hyperparameters, VbState};
use nalgebra::{DMatrix, DVector};

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn max_abs_diff(a: &Matrix, b: &DMatrix<f64>) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.nrows(), b.ncols()));
    (0..a.rows())
        .flat_map(|i| (0..a.cols()).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - b[(i, j)]).abs())
        .fold(0.0, f64::max)
}

pub fn gaussian(rng: &mut RngState, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.normal())
}

/// Random symmetric positive-definite matrix `A Aᵀ / dim + 0.1 I`.
pub fn random_spd(rng: &mut RngState, dim: usize) -> Matrix {
    let a = gaussian(rng, dim, dim, 1.0);
    let mut s = a.matmul_t(&a).scaled(1.0 / dim as f64);
    s.add_diag(0.1);
    s
}

pub fn random_recognition(rng: &mut RngState, n: usize, k: usize) -> RecognitionOutput {
    RecognitionOutput {
        mu: gaussian(rng, n, k, 1.0),
        var: Matrix::from_fn(n, k, |_, _| 0.05 + rng.uniform()),
    }
}

pub fn random_gamma(rng: &mut RngState) -> GammaPosterior {
    GammaPosterior {
        shape: 0.5 + 3.0 * rng.uniform(),
        rate: 0.5 + 3.0 * rng.uniform(),
    }
}

/// Random voxel-side state with every factor away from its prior.
pub fn random_state(rng: &mut RngState, n: usize, d2: usize, k: usize, k_bar: usize) -> VbState {
    let mut s = VbState::init(k, k_bar, n, d2, Hyperparameters::default(), rng).unwrap();
    s.q_b.mean = gaussian(rng, k, d2, 1.0);
    s.q_b.cov = (0..d2).map(|_| random_spd(rng, k)).collect();
    s.q_h.mean = gaussian(rng, k_bar, d2, 1.0);
    s.q_h.cov = (0..d2).map(|_| random_spd(rng, k_bar)).collect();
    s.q_zbar.mean = gaussian(rng, n, k_bar, 1.0);
    s.q_zbar.cov = random_spd(rng, k_bar);
    s.q_tau = (0..d2).map(|_| random_gamma(rng)).collect();
    s.q_eta = (0..d2).map(|_| random_gamma(rng)).collect();
    s.q_gamma = random_gamma(rng);
    s
}

/// Random problem sizes within the small-instance limits used by the oracles.
pub fn small_dims(rng: &mut RngState) -> (usize, usize, usize, usize) {
    (2 + rng.below(7), 1 + rng.below(4), 1 + rng.below(3), 1 + rng.below(3))
}

/// Fixed 16x16 test pair: smooth pattern and a distorted copy.
pub fn fixed_pair() -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = (0..256)
        .map(|i| {
            let (r, c) = ((i / 16) as f64, (i % 16) as f64);
            ((0.7 * r).sin() + (0.4 * c).cos() + 2.0) / 4.0
        })
        .collect();
    let b: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, v)| (0.8 * v + 0.1 + 0.05 * ((i * 37 % 11) as f64 / 11.0 - 0.5)).clamp(0.0, 1.0))
        .collect();
    (a, b)
}

/// Direct evaluation of the windowed formula: separable Gaussian built from
/// its 1-D kernel, two-pass local moments, mean over valid windows.
pub fn ssim_oracle(a: &[f64], b: &[f64], w: usize, h: usize, range: f64) -> f64 {
    let g1: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp()).collect();
    let s1: f64 = g1.iter().sum();
    let g1: Vec<f64> = g1.iter().map(|v| v / s1).collect();
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mut vals = Vec::new();
    for top in 0..=h - 11 {
        for left in 0..=w - 11 {
            let px = |img: &[f64], r: usize, c: usize| img[(top + r) * w + left + c];
            let wt = |r: usize, c: usize| g1[r] * g1[c];
            let mut mx = 0.0;
            let mut my = 0.0;
            for r in 0..11 {
                for c in 0..11 {
                    mx += wt(r, c) * px(a, r, c);
                    my += wt(r, c) * px(b, r, c);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for r in 0..11 {
                for c in 0..11 {
                    let (dx, dy) = (px(a, r, c) - mx, px(b, r, c) - my);
                    vx += wt(r, c) * dx * dx;
                    vy += wt(r, c) * dy * dy;
                    cxy += wt(r, c) * dx * dy;
                }
            }
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let cs = (2.0 * cxy + c2) / (vx + vy + c2);
            vals.push(l * cs);
        }
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Bayesian linear regression `t = A w + noise(γ)`, prior `w ~ N(0, α⁻¹ I)`,
/// solved with an LU inverse.
pub fn blr(a: &DMatrix<f64>, t: &DVector<f64>, alpha: f64, gamma: f64) -> (DVector<f64>, DMatrix<f64>) {
    let k = a.ncols();
    let prec = DMatrix::identity(k, k) * alpha + a.transpose() * a * gamma;
    let cov = prec.try_inverse().expect("invertible");
    let mean = &cov * a.transpose() * t * gamma;
    (mean, cov)
}

/// Rows appended to a design so that `AᵀA` gains `scale * S`.
pub fn covariance_rows(s: &Matrix, scale: f64) -> DMatrix<f64> {
    let l = to_na(s).cholesky().expect("spd").l();
    l.transpose() * scale.sqrt()
}

pub fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

pub fn with_zero_tail(v: DVector<f64>, extra: usize) -> DVector<f64> {
    let n = v.len();
    v.resize_vertically(n + extra, 0.0)
}
