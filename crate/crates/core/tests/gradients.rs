//! Backpropagated bound gradients against central finite differences.

mod common;

use common::gaussian;
use dgmm_core::math::{Matrix, RngState};
use dgmm_core::nn::{
    elbo_minibatch_grad_with_noise, MeanActivation, MlpParams, VarianceMode, VoxelContext,
};

const STEP: f64 = 1e-5;

struct Problem {
    recog: MlpParams,
    gen: MlpParams,
    x: Matrix,
    y: Matrix,
    b: Matrix,
    h: Matrix,
    zbar: Matrix,
    gamma: f64,
    eps: Vec<Matrix>,
}

impl Problem {
    fn new(recog_sizes: &[usize], gen_act: MeanActivation, variance: VarianceMode, n: usize, d2: usize, seed: u64) -> Self {
        let mut rng = RngState::new(seed);
        let k = *recog_sizes.last().unwrap();
        let d1 = recog_sizes[0];
        let gen_sizes: Vec<usize> = recog_sizes.iter().rev().copied().collect();
        let k_bar = 2;
        Self {
            recog: MlpParams::new(recog_sizes, MeanActivation::Identity, VarianceMode::Learned, &mut rng).unwrap(),
            gen: MlpParams::new(&gen_sizes, gen_act, variance, &mut rng).unwrap(),
            x: gaussian(&mut rng, n, d1, 1.0),
            y: gaussian(&mut rng, n, d2, 1.0),
            b: gaussian(&mut rng, k, d2, 1.0),
            h: gaussian(&mut rng, k_bar, d2, 1.0),
            zbar: gaussian(&mut rng, n, k_bar, 1.0),
            gamma: 2.5,
            eps: vec![gaussian(&mut rng, n, k, 1.0)],
        }
    }

    fn loss(&self, recog: &MlpParams, gen: &MlpParams) -> f64 {
        let ctx = VoxelContext {
            b_mean: &self.b,
            h_mean: &self.h,
            gamma: self.gamma,
            zbar_mean: &self.zbar,
        };
        elbo_minibatch_grad_with_noise(recog, gen, &self.x, &self.y, &ctx, &self.eps)
            .unwrap()
            .loss
    }

    /// Largest relative error over the checked parameters. `stride` thins the
    /// parameters visited in each tensor. The denominator is floored at the
    /// rounding noise of the difference quotient, `ε |loss| / step`, times 100.
    fn worst_relative_error(&self, stride: usize) -> f64 {
        let ctx = VoxelContext {
            b_mean: &self.b,
            h_mean: &self.h,
            gamma: self.gamma,
            zbar_mean: &self.zbar,
        };
        let g = elbo_minibatch_grad_with_noise(&self.recog, &self.gen, &self.x, &self.y, &ctx, &self.eps).unwrap();
        let floor = (100.0 * f64::EPSILON * g.loss.abs() / STEP).max(1e-6);
        let mut worst: f64 = 0.0;
        for net in 0..2 {
            let analytic = if net == 0 { g.recog.tensors() } else { g.gen.tensors() };
            let analytic: Vec<Vec<f64>> = analytic.into_iter().map(<[f64]>::to_vec).collect();
            for (t, grads) in analytic.iter().enumerate() {
                for idx in (0..grads.len()).step_by(stride) {
                    let eval = |delta: f64| {
                        let (mut r, mut gn) = (self.recog.clone(), self.gen.clone());
                        let target = if net == 0 { &mut r } else { &mut gn };
                        target.tensors_mut()[t][idx] += delta;
                        self.loss(&r, &gn)
                    };
                    let fd = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
                    let a = grads[idx];
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
                    worst = worst.max(rel);
                }
            }
        }
        worst
    }
}

#[test]
fn small_networks_all_parameters() {
    let p = Problem::new(&[6, 3, 2], MeanActivation::Identity, VarianceMode::Learned, 4, 5, 1);
    let worst = p.worst_relative_error(1);
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn logistic_image_head() {
    let p = Problem::new(&[6, 3, 2], MeanActivation::Logistic, VarianceMode::Learned, 4, 5, 2);
    assert!(p.worst_relative_error(1) <= 1e-4);
}

#[test]
fn fixed_image_variance() {
    let p = Problem::new(&[6, 4, 3, 2], MeanActivation::Identity, VarianceMode::Fixed(0.3), 3, 2, 3);
    assert!(p.worst_relative_error(1) <= 1e-4);
}

#[test]
fn default_layer_shapes_sampled() {
    let p = Problem::new(&[784, 256, 128, 10], MeanActivation::Identity, VarianceMode::Learned, 2, 6, 4);
    let worst = p.worst_relative_error(2999);
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}
