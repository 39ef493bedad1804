//! Outer training loop: each epoch runs minibatch gradient steps on both
//! networks, then one conjugate sweep over the voxel-side factors.

use std::time::Instant;

use log::debug;

use crate::error::{Error, Result};
use crate::math::{Matrix, RngState};
use crate::nn::{
    elbo_minibatch_grad, forward_recognition, MeanActivation, MlpParams, OptimizerKind, OptimizerState,
    VarianceMode, VoxelContext,
};
use crate::vb::bound::elbo;
use crate::vb::state::{Hyperparameters, VbState};
use crate::vb::updates::{Factor, GammaRate};

/// Below this many rows every gradient step uses the whole training set.
pub const FULL_BATCH_BELOW: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub k_bar: usize,
    /// Hidden widths of the recognition network (`D₁ -> hidden... -> K`).
    pub recog_hidden: Vec<usize>,
    /// Hidden widths of the generative network; `None` mirrors `recog_hidden`.
    pub gen_hidden: Option<Vec<usize>>,
    pub image_activation: MeanActivation,
    pub image_variance: VarianceMode,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Monte-Carlo samples per row for the gradient and the logged bound.
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Epoch lag over which the relative bound change is measured.
    pub window: usize,
    pub order: Vec<Factor>,
    pub gamma_rate: GammaRate,
    pub hyper: Hyperparameters,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 10,
            k_bar: 10,
            recog_hidden: vec![256, 128],
            gen_hidden: None,
            image_activation: MeanActivation::Identity,
            image_variance: VarianceMode::Learned,
            max_epochs: 500,
            batch_size: 32,
            lr: 1e-3,
            optimizer: OptimizerKind::RmsProp { decay: 0.9 },
            samples: 1,
            seed: 0,
            tol: 1e-5,
            window: 5,
            order: Factor::DEFAULT_ORDER.to_vec(),
            gamma_rate: GammaRate::PluginMeans,
            hyper: Hyperparameters::default(),
        }
    }
}

impl TrainConfig {
    pub fn recog_sizes(&self, d1: usize) -> Vec<usize> {
        let mut s = vec![d1];
        s.extend(&self.recog_hidden);
        s.push(self.k);
        s
    }

    pub fn gen_sizes(&self, d1: usize) -> Vec<usize> {
        let hidden: Vec<usize> = match &self.gen_hidden {
            Some(h) => h.clone(),
            None => self.recog_hidden.iter().rev().copied().collect(),
        };
        let mut s = vec![self.k];
        s.extend(hidden);
        s.push(d1);
        s
    }
}

/// Everything needed for prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub recog: MlpParams,
    pub gen: MlpParams,
    pub vb: VbState,
    /// Recognition means `⟨z_i⟩` of the training rows (`N x K`).
    pub train_latents: Matrix,
    pub seed: u64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub bound: f64,
    pub latent_kl: f64,
    pub image_loglik: f64,
    pub voxel_loglik: f64,
    pub conjugate_kl: f64,
    pub mean_batch_loss: f64,
    pub gamma_mean: f64,
    pub wall_time_s: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str =
        "epoch,bound,latent_kl,image_loglik,voxel_loglik,conjugate_kl,mean_batch_loss,gamma_mean,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3}",
            self.epoch,
            self.bound,
            self.latent_kl,
            self.image_loglik,
            self.voxel_loglik,
            self.conjugate_kl,
            self.mean_batch_loss,
            self.gamma_mean,
            self.wall_time_s
        )
    }

    /// Equality on every field except wall time.
    pub fn same_numbers(&self, other: &EpochRecord) -> bool {
        let strip = |r: &EpochRecord| EpochRecord {
            wall_time_s: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

pub fn log_to_csv(log: &[EpochRecord]) -> String {
    let mut s = String::from(EpochRecord::CSV_HEADER);
    s.push('\n');
    for r in log {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: Vec<EpochRecord>,
    pub converged: bool,
}

fn validate(x: &Matrix, y: &Matrix, cfg: &TrainConfig) -> Result<()> {
    if x.rows() < 2 {
        return Err(Error::Precondition(format!(
            "training needs at least 2 rows, got {}",
            x.rows()
        )));
    }
    if y.rows() != x.rows() {
        return Err(Error::shape("train: voxel rows", x.rows(), y.rows()));
    }
    if cfg.samples == 0 || cfg.batch_size == 0 || cfg.window == 0 {
        return Err(Error::InvalidConfig("samples, batch_size and window must be positive".into()));
    }
    if !(cfg.lr > 0.0) || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidConfig("lr must be positive and tol non-negative".into()));
    }
    if cfg.order.is_empty() {
        return Err(Error::InvalidConfig("sweep order is empty".into()));
    }
    Ok(())
}

fn is_divergence(e: &Error) -> bool {
    match e {
        Error::NonFiniteLoss(_) | Error::NonFinite(_) => true,
        Error::NotPositiveDefinite { value, .. } => !value.is_finite(),
        _ => false,
    }
}

/// Trains both networks and the conjugate factors on `(x, y)` (training rows only).
pub fn train(x: &Matrix, y: &Matrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    validate(x, y, cfg)?;
    let (n, d1, d2) = (x.rows(), x.cols(), y.cols());
    let mut rng = RngState::new(cfg.seed);
    let recog_sizes = cfg.recog_sizes(d1);
    let gen_sizes = cfg.gen_sizes(d1);
    let mut recog = MlpParams::new(&recog_sizes, MeanActivation::Identity, VarianceMode::Learned, &mut rng)?;
    let mut gen = MlpParams::new(&gen_sizes, cfg.image_activation, cfg.image_variance, &mut rng)?;
    let mut vb = VbState::init(cfg.k, cfg.k_bar, n, d2, cfg.hyper, &mut rng)?;
    let mut opt_r = OptimizerState::new(cfg.optimizer, cfg.lr, &recog);
    let mut opt_g = OptimizerState::new(cfg.optimizer, cfg.lr, &gen);

    let batch = if n < FULL_BATCH_BELOW { n } else { cfg.batch_size.min(n) };
    let start = Instant::now();
    let mut log: Vec<EpochRecord> = Vec::new();
    let mut converged = false;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.max_epochs {
        let checkpoint = (recog.clone(), gen.clone(), vb.clone(), opt_r.steps());
        let step = |recog: &mut MlpParams,
                    gen: &mut MlpParams,
                    vb: &mut VbState,
                    opt_r: &mut OptimizerState,
                    opt_g: &mut OptimizerState,
                    order: &mut Vec<usize>,
                    rng: &mut RngState|
         -> Result<EpochRecord> {
            rng.shuffle(order);
            let mut loss_sum = 0.0;
            let mut batches = 0usize;
            for rows in order.chunks(batch) {
                let xb = x.select_rows(rows);
                let yb = y.select_rows(rows);
                let zb = vb.zbar_rows(rows);
                let ctx = VoxelContext {
                    b_mean: &vb.q_b.mean,
                    h_mean: &vb.q_h.mean,
                    gamma: vb.gamma_mean(),
                    zbar_mean: &zb,
                };
                let g = elbo_minibatch_grad(recog, gen, &xb, &yb, &ctx, cfg.samples, rng)?;
                opt_r.step(recog, &g.recog)?;
                opt_g.step(gen, &g.gen)?;
                loss_sum += g.loss;
                batches += 1;
            }
            if !recog.is_finite() || !gen.is_finite() {
                return Err(Error::NonFiniteLoss("network parameters"));
            }
            let rec = forward_recognition(recog, x)?;
            vb.sweep(&rec, y, &cfg.order, cfg.gamma_rate)?;
            if !vb.is_finite() {
                return Err(Error::NonFiniteLoss("conjugate factors"));
            }
            let b = elbo(vb, recog, gen, x, y, cfg.samples, rng)?;
            Ok(EpochRecord {
                epoch,
                bound: b.total(),
                latent_kl: b.latent_kl,
                image_loglik: b.image_loglik,
                voxel_loglik: b.voxel.expected_loglik,
                conjugate_kl: b.voxel.kl_sum(),
                mean_batch_loss: loss_sum / batches as f64,
                gamma_mean: vb.gamma_mean(),
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        };
        match step(&mut recog, &mut gen, &mut vb, &mut opt_r, &mut opt_g, &mut order, &mut rng) {
            Ok(rec) => {
                debug!("epoch {epoch}: bound {:.6e}", rec.bound);
                log.push(rec);
            }
            Err(e) if is_divergence(&e) => {
                let (recog, gen, vb, steps) = checkpoint;
                let train_latents = forward_recognition(&recog, x)?.mu;
                return Err(Error::Diverged {
                    epoch,
                    checkpoint: Box::new(TrainedModel {
                        recog,
                        gen,
                        vb,
                        train_latents,
                        seed: cfg.seed,
                        steps,
                    }),
                });
            }
            Err(e) => return Err(e),
        }
        if log.len() > cfg.window {
            let now = log[log.len() - 1].bound;
            let then = log[log.len() - 1 - cfg.window].bound;
            if ((now - then) / then.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tol {
                converged = true;
                break;
            }
        }
    }

    let train_latents = forward_recognition(&recog, x)?.mu;
    let steps = opt_r.steps();
    Ok(TrainOutcome {
        model: TrainedModel {
            recog,
            gen,
            vb,
            train_latents,
            seed: cfg.seed,
            steps,
        },
        log,
        converged,
    })
}
