use crate::error::{Error, Result};
use crate::math::{Matrix, RngState};

/// Log-variance outputs are clamped to this range before exponentiation.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

/// Output nonlinearity of the mean head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanActivation {
    Identity,
    /// For pixel data bounded in `[0, 1]`.
    Logistic,
}

impl MeanActivation {
    pub fn name(self) -> &'static str {
        match self {
            MeanActivation::Identity => "identity",
            MeanActivation::Logistic => "logistic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Self::Identity),
            "logistic" => Some(Self::Logistic),
            _ => None,
        }
    }
}

/// How the variance head is used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarianceMode {
    /// Per-output, per-instance log-variance from the network.
    Learned,
    /// A global constant variance; the log-variance head is ignored.
    Fixed(f64),
}

/// Affine layer `y = W x + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn init(fan_in: usize, fan_out: usize, rng: &mut RngState) -> Self {
        let std = 1.0 / (fan_in as f64).sqrt();
        let weight = Matrix::from_fn(fan_out, fan_in, |_, _| std * rng.normal());
        Self {
            weight,
            bias: vec![0.0; fan_out],
        }
    }

    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    /// Batch forward: rows of `x` are instances.
    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul_t(&self.weight);
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        out
    }

    /// Accumulates parameter gradients from `delta` (batch x out) and `input`
    /// (batch x in); returns the gradient with respect to `input` if asked.
    fn backward(&self, input: &Matrix, delta: &Matrix, grad: &mut Dense, want_input: bool) -> Option<Matrix> {
        grad.weight.add_assign(&delta.t_matmul(input));
        for r in 0..delta.rows() {
            for (g, d) in grad.bias.iter_mut().zip(delta.row(r)) {
                *g += d;
            }
        }
        want_input.then(|| delta.matmul(&self.weight))
    }
}

/// Tanh MLP with a Gaussian output: a mean head and a log-variance head on
/// top of the last hidden layer.
///
/// `sizes = [input, hidden..., output]`. With only two sizes the heads read
/// the input directly.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    pub hidden: Vec<Dense>,
    pub mean_head: Dense,
    pub log_var_head: Dense,
    pub mean_activation: MeanActivation,
    pub variance: VarianceMode,
}

/// Activations kept from a forward pass for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `layers[0]` is the input, `layers[i]` the output of hidden layer `i-1`.
    layers: Vec<Matrix>,
    raw_log_var: Matrix,
    pub mean: Matrix,
    /// Clamped log-variance (or the fixed constant).
    pub log_var: Matrix,
}

impl ForwardCache {
    pub fn var(&self) -> Matrix {
        self.log_var.map(f64::exp)
    }
}

/// Per-instance Gaussian over the shared latents produced by the recognition network.
#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionOutput {
    pub mu: Matrix,
    pub var: Matrix,
}

impl MlpParams {
    pub fn new(
        sizes: &[usize],
        mean_activation: MeanActivation,
        variance: VarianceMode,
        rng: &mut RngState,
    ) -> Result<Self> {
        Self::check_sizes(sizes)?;
        if let VarianceMode::Fixed(v) = variance {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("fixed variance must be positive, got {v}")));
            }
        }
        let hidden = sizes
            .windows(2)
            .take(sizes.len() - 2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        let last_in = sizes[sizes.len() - 2];
        let out = sizes[sizes.len() - 1];
        let mean_head = Dense::init(last_in, out, rng);
        let log_var_head = Dense::init(last_in, out, rng);
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            mean_head,
            log_var_head,
            mean_activation,
            variance,
        })
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer sizes need at least two positive entries, got {sizes:?}"
            )));
        }
        Ok(())
    }

    /// Same structure, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        let s = &self.sizes;
        Self {
            sizes: s.clone(),
            hidden: s.windows(2).take(s.len() - 2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            mean_head: Dense::zeros(s[s.len() - 2], s[s.len() - 1]),
            log_var_head: Dense::zeros(s[s.len() - 2], s[s.len() - 1]),
            mean_activation: self.mean_activation,
            variance: self.variance,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden
            .iter()
            .chain([&self.mean_head, &self.log_var_head])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden
            .iter_mut()
            .chain([&mut self.mean_head, &mut self.log_var_head])
    }

    /// Parameter tensors in a fixed order, paired with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut names = Vec::new();
        for i in 0..self.hidden.len() {
            names.push(format!("hidden{i}"));
        }
        names.push("mean_head".into());
        names.push("log_var_head".into());
        let mut out = Vec::new();
        for (name, layer) in names.into_iter().zip(self.layers()) {
            out.push((format!("{name}.weight"), layer.weight.as_slice()));
            out.push((format!("{name}.bias"), layer.bias.as_slice()));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.sizes == other.sizes
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("MlpParams::forward", self.input_dim(), x.cols()));
        }
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        layers.push(x.clone());
        for layer in &self.hidden {
            let h = layer.apply(layers.last().expect("input present")).map(f64::tanh);
            layers.push(h);
        }
        let top = layers.last().expect("input present");
        let mean = match self.mean_activation {
            MeanActivation::Identity => self.mean_head.apply(top),
            MeanActivation::Logistic => self.mean_head.apply(top).map(logistic),
        };
        let raw_log_var = self.log_var_head.apply(top);
        let log_var = match self.variance {
            VarianceMode::Learned => raw_log_var.map(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX)),
            VarianceMode::Fixed(v) => Matrix::from_fn(x.rows(), self.output_dim(), |_, _| v.ln()),
        };
        Ok(ForwardCache {
            layers,
            raw_log_var,
            mean,
            log_var,
        })
    }

    /// Mean head only.
    pub fn forward_mean(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.mean)
    }

    /// Backprop of upstream gradients with respect to the mean output and the
    /// clamped log-variance output. Returns parameter gradients and, if
    /// requested, the gradient with respect to the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_mean: &Matrix,
        d_log_var: &Matrix,
        want_input: bool,
    ) -> (MlpParams, Option<Matrix>) {
        let mut grads = self.zeros_like();
        let top = cache.layers.last().expect("input present");

        let d_mean_pre = match self.mean_activation {
            MeanActivation::Identity => d_mean.clone(),
            MeanActivation::Logistic => {
                let mut d = d_mean.clone();
                for (g, &m) in d.as_mut_slice().iter_mut().zip(cache.mean.as_slice()) {
                    *g *= m * (1.0 - m);
                }
                d
            }
        };
        let d_lv_raw = match self.variance {
            VarianceMode::Learned => {
                let mut d = d_log_var.clone();
                for (g, &raw) in d.as_mut_slice().iter_mut().zip(cache.raw_log_var.as_slice()) {
                    if !(LOG_VAR_MIN..=LOG_VAR_MAX).contains(&raw) {
                        *g = 0.0;
                    }
                }
                d
            }
            VarianceMode::Fixed(_) => Matrix::zeros(d_log_var.rows(), d_log_var.cols()),
        };

        let need_top = want_input || !self.hidden.is_empty();
        let mut d_top = self
            .mean_head
            .backward(top, &d_mean_pre, &mut grads.mean_head, need_top);
        if let Some(d2) = self
            .log_var_head
            .backward(top, &d_lv_raw, &mut grads.log_var_head, need_top)
        {
            d_top.as_mut().expect("both heads return").add_assign(&d2);
        }

        let mut d_h = d_top;
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let out = &cache.layers[i + 1];
            let mut delta = d_h.expect("gradient needed below");
            for (g, &h) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                *g *= 1.0 - h * h;
            }
            let need = want_input || i > 0;
            d_h = layer.backward(&cache.layers[i], &delta, &mut grads.hidden[i], need);
        }
        (grads, if want_input { d_h } else { None })
    }
}

#[inline]
fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Recognition pass: per-row `(mu_z, var_z)`.
pub fn forward_recognition(params: &MlpParams, x: &Matrix) -> Result<RecognitionOutput> {
    let cache = params.forward(x)?;
    let var = cache.var();
    Ok(RecognitionOutput {
        mu: cache.mean,
        var,
    })
}
