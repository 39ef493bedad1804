//! Run configuration: flat `section.key = value` text. Every key has a
//! default except `data.path`; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dgmm_core::data::{MapKind, SyntheticConfig};
use dgmm_core::kv::{format_sizes, parse_sizes, KvFile};
use dgmm_core::math::GammaPosterior;
use dgmm_core::nn::{MeanActivation, OptimizerKind, VarianceMode};
use dgmm_core::predict::{default_rho_grid, Bandwidth, PredictSettings, RhoChoice};
use dgmm_core::vb::{Factor, GammaRate, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct ScreenSettings {
    pub enabled: bool,
    pub folds: usize,
    pub penalty: f64,
}

impl Default for ScreenSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            folds: 10,
            penalty: dgmm_core::eval::DEFAULT_RIDGE_PENALTY,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub generate: SyntheticConfig,
    pub train: TrainConfig,
    pub screen: ScreenSettings,
    pub predict: PredictSettings,
    /// ρ picked by cross-validation in a previous run (informational).
    pub rho_selected: Option<f64>,
}

fn bad(key: &str, raw: &str) -> CliError {
    CliError::Config(format!("bad value for {key}: {raw:?}"))
}

fn num<T: FromStr>(key: &str, raw: &str) -> CliResult<T> {
    raw.parse().map_err(|_| bad(key, raw))
}

fn precision(key: &str, raw: &str) -> CliResult<f64> {
    match raw {
        "inf" | "none" => Ok(f64::INFINITY),
        _ => num(key, raw),
    }
}

fn sizes(key: &str, raw: &str) -> CliResult<Vec<usize>> {
    if raw.is_empty() || raw == "none" {
        return Ok(Vec::new());
    }
    parse_sizes(raw).filter(|s| !s.contains(&0)).ok_or_else(|| bad(key, raw))
}

fn gamma_prior(key: &str, raw: &str) -> CliResult<GammaPosterior> {
    let (a, b) = raw.split_once(',').ok_or_else(|| bad(key, raw))?;
    GammaPosterior::new(num(key, a.trim())?, num(key, b.trim())?).map_err(|_| bad(key, raw))
}

fn variance_name(v: VarianceMode) -> String {
    match v {
        VarianceMode::Learned => "learned".into(),
        VarianceMode::Fixed(x) => format!("fixed:{x}"),
    }
}

fn optimizer_name(o: OptimizerKind) -> String {
    match o {
        OptimizerKind::RmsProp { decay } if decay != 0.9 => format!("rmsprop:{decay}"),
        _ => o.name().to_string(),
    }
}

fn parse_optimizer(key: &str, raw: &str) -> CliResult<OptimizerKind> {
    if let Some(d) = raw.strip_prefix("rmsprop:") {
        return Ok(OptimizerKind::RmsProp { decay: num(key, d)? });
    }
    OptimizerKind::from_name(raw).ok_or_else(|| bad(key, raw))
}

fn bool_value(key: &str, raw: &str) -> CliResult<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, raw)),
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let kv = KvFile::read(path).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Self::from_kv(&kv)?;
        // relative dataset paths are taken relative to the config file
        if let (Some(p), Some(dir)) = (&cfg.data_path, path.parent()) {
            if p.is_relative() {
                cfg.data_path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn from_kv(kv: &KvFile) -> CliResult<Self> {
        let mut c = Self::default();
        for key in kv.keys() {
            let raw = kv.get(key).unwrap_or_default();
            c.set(key, raw)?;
        }
        Ok(c)
    }

    fn set(&mut self, key: &str, raw: &str) -> CliResult<()> {
        let g = &mut self.generate;
        let t = &mut self.train;
        let p = &mut self.predict;
        match key {
            "data.path" => self.data_path = Some(PathBuf::from(raw)),

            "generate.name" => g.name = raw.to_string(),
            "generate.n" => g.n = num(key, raw)?,
            "generate.n_test" => g.n_test = num(key, raw)?,
            "generate.d1" => g.d1 = num(key, raw)?,
            "generate.d2" => g.d2 = num(key, raw)?,
            "generate.k" => g.k = num(key, raw)?,
            "generate.k_bar" => g.k_bar = num(key, raw)?,
            "generate.width" => g.width = if raw == "auto" { None } else { Some(num(key, raw)?) },
            "generate.voxel_precision" => g.voxel_precision = precision(key, raw)?,
            "generate.pixel_precision" => g.pixel_precision = precision(key, raw)?,
            "generate.map" => g.map = MapKind::from_name(raw).ok_or_else(|| bad(key, raw))?,
            "generate.seed" => g.seed = num(key, raw)?,

            "model.k" => t.k = num(key, raw)?,
            "model.k_bar" => t.k_bar = num(key, raw)?,
            "model.recog_hidden" => t.recog_hidden = sizes(key, raw)?,
            "model.gen_hidden" => t.gen_hidden = if raw == "mirror" { None } else { Some(sizes(key, raw)?) },
            "model.image_activation" => {
                t.image_activation = MeanActivation::from_name(raw).ok_or_else(|| bad(key, raw))?
            }
            "model.image_variance" => {
                t.image_variance = match raw.strip_prefix("fixed:") {
                    Some(v) => VarianceMode::Fixed(num(key, v)?),
                    None if raw == "learned" => VarianceMode::Learned,
                    None => return Err(bad(key, raw)),
                }
            }

            "train.max_epochs" => t.max_epochs = num(key, raw)?,
            "train.batch_size" => t.batch_size = num(key, raw)?,
            "train.lr" => t.lr = num(key, raw)?,
            "train.optimizer" => t.optimizer = parse_optimizer(key, raw)?,
            "train.samples" => t.samples = num(key, raw)?,
            "train.seed" => t.seed = num(key, raw)?,
            "train.tol" => t.tol = num(key, raw)?,
            "train.window" => t.window = num(key, raw)?,
            "train.order" => {
                t.order = raw
                    .split(',')
                    .map(|s| Factor::from_name(s.trim()).ok_or_else(|| bad(key, raw)))
                    .collect::<CliResult<_>>()?
            }
            "train.gamma_rate" => t.gamma_rate = GammaRate::from_name(raw).ok_or_else(|| bad(key, raw))?,
            "train.prior_tau" => t.hyper.tau = gamma_prior(key, raw)?,
            "train.prior_eta" => t.hyper.eta = gamma_prior(key, raw)?,
            "train.prior_gamma" => t.hyper.gamma = gamma_prior(key, raw)?,

            "screen.enabled" => self.screen.enabled = bool_value(key, raw)?,
            "screen.folds" => self.screen.folds = num(key, raw)?,
            "screen.penalty" => self.screen.penalty = num(key, raw)?,

            "predict.neighbors" => p.neighbors = num(key, raw)?,
            "predict.bandwidth" => {
                p.bandwidth = if raw == "median" {
                    Bandwidth::MedianDistance
                } else {
                    Bandwidth::Fixed(num(key, raw)?)
                }
            }
            "predict.rho" => {
                let folds = match &p.rho {
                    RhoChoice::CrossValidate { folds, .. } => *folds,
                    RhoChoice::Fixed(_) => 5,
                };
                p.rho = if raw == "cv" {
                    RhoChoice::CrossValidate {
                        grid: default_rho_grid(),
                        folds,
                    }
                } else {
                    RhoChoice::Fixed(num(key, raw)?)
                }
            }
            "predict.rho_folds" => {
                let f = num(key, raw)?;
                if let RhoChoice::CrossValidate { folds, .. } = &mut p.rho {
                    *folds = f;
                }
            }
            "predict.samples" => p.samples = num(key, raw)?,
            "predict.seed" => p.seed = num(key, raw)?,
            "predict.rho_selected" => self.rho_selected = Some(num(key, raw)?),

            _ => return Err(CliError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Every setting, in a form [`RunConfig::from_kv`] reads back unchanged.
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        if let Some(p) = &self.data_path {
            kv.set("data.path", p.display());
        }
        let g = &self.generate;
        kv.set("generate.name", &g.name);
        kv.set("generate.n", g.n);
        kv.set("generate.n_test", g.n_test);
        kv.set("generate.d1", g.d1);
        kv.set("generate.d2", g.d2);
        kv.set("generate.k", g.k);
        kv.set("generate.k_bar", g.k_bar);
        kv.set("generate.width", g.width.map_or("auto".to_string(), |w| w.to_string()));
        kv.set("generate.voxel_precision", g.voxel_precision);
        kv.set("generate.pixel_precision", g.pixel_precision);
        kv.set("generate.map", g.map.name());
        kv.set("generate.seed", g.seed);

        let t = &self.train;
        kv.set("model.k", t.k);
        kv.set("model.k_bar", t.k_bar);
        kv.set("model.recog_hidden", format_sizes(&t.recog_hidden));
        kv.set(
            "model.gen_hidden",
            t.gen_hidden.as_ref().map_or("mirror".to_string(), |h| format_sizes(h)),
        );
        kv.set("model.image_activation", t.image_activation.name());
        kv.set("model.image_variance", variance_name(t.image_variance));
        kv.set("train.max_epochs", t.max_epochs);
        kv.set("train.batch_size", t.batch_size);
        kv.set("train.lr", t.lr);
        kv.set("train.optimizer", optimizer_name(t.optimizer));
        kv.set("train.samples", t.samples);
        kv.set("train.seed", t.seed);
        kv.set("train.tol", t.tol);
        kv.set("train.window", t.window);
        let order: Vec<&str> = t.order.iter().map(|f| f.name()).collect();
        kv.set("train.order", order.join(","));
        kv.set("train.gamma_rate", t.gamma_rate.name());
        let prior = |g: GammaPosterior| format!("{},{}", g.shape, g.rate);
        kv.set("train.prior_tau", prior(t.hyper.tau));
        kv.set("train.prior_eta", prior(t.hyper.eta));
        kv.set("train.prior_gamma", prior(t.hyper.gamma));

        kv.set("screen.enabled", self.screen.enabled);
        kv.set("screen.folds", self.screen.folds);
        kv.set("screen.penalty", self.screen.penalty);

        let p = &self.predict;
        kv.set("predict.neighbors", p.neighbors);
        kv.set(
            "predict.bandwidth",
            match p.bandwidth {
                Bandwidth::MedianDistance => "median".to_string(),
                Bandwidth::Fixed(t) => t.to_string(),
            },
        );
        match &p.rho {
            RhoChoice::Fixed(r) => kv.set("predict.rho", r),
            RhoChoice::CrossValidate { folds, .. } => {
                kv.set("predict.rho", "cv");
                kv.set("predict.rho_folds", folds);
            }
        }
        kv.set("predict.samples", p.samples);
        kv.set("predict.seed", p.seed);
        if let Some(r) = self.rho_selected {
            kv.set("predict.rho_selected", r);
        }
        kv
    }

    pub fn data_path(&self) -> CliResult<&Path> {
        let p = self
            .data_path
            .as_deref()
            .ok_or_else(|| CliError::Config("data.path is required".into()))?;
        if !p.exists() {
            return Err(CliError::Config(format!("dataset {} does not exist", p.display())));
        }
        Ok(p)
    }
}
