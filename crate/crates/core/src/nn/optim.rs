use crate::error::{Error, Result};
use crate::nn::MlpParams;

const EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp { decay: f64 },
    AdaGrad,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp { .. } => "rmsprop",
            OptimizerKind::AdaGrad => "adagrad",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(Self::Sgd),
            "rmsprop" => Some(Self::RmsProp { decay: 0.9 }),
            "adagrad" => Some(Self::AdaGrad),
            _ => None,
        }
    }
}

/// Learning rate, per-parameter squared-gradient accumulators and step count.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    accum: Vec<Vec<f64>>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, params: &MlpParams) -> Self {
        Self::with_shapes(kind, lr, params.tensors().iter().map(|t| t.len()))
    }

    pub fn with_shapes(kind: OptimizerKind, lr: f64, lens: impl IntoIterator<Item = usize>) -> Self {
        Self {
            kind,
            lr,
            accum: lens.into_iter().map(|n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        if !params.same_shape(grads) {
            return Err(Error::shape(
                "optimizer_step",
                format!("{:?}", params.sizes()),
                format!("{:?}", grads.sizes()),
            ));
        }
        let g = grads.tensors();
        let mut p = params.tensors_mut();
        self.step_slices(&mut p, &g)
    }

    /// Update over raw parameter slices; shapes must mirror the accumulators.
    pub fn step_slices(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let ok = params.len() == self.accum.len()
            && grads.len() == self.accum.len()
            && self
                .accum
                .iter()
                .zip(params.iter())
                .zip(grads)
                .all(|((a, p), g)| a.len() == p.len() && a.len() == g.len());
        if !ok {
            return Err(Error::shape("optimizer_step", "accumulator shapes", "different tensors"));
        }
        let lr = self.lr;
        for ((acc, p), g) in self.accum.iter_mut().zip(params.iter_mut()).zip(grads) {
            for ((a, w), &gi) in acc.iter_mut().zip(p.iter_mut()).zip(g.iter()) {
                match self.kind {
                    OptimizerKind::Sgd => *w -= lr * gi,
                    OptimizerKind::RmsProp { decay } => {
                        *a = decay * *a + (1.0 - decay) * gi * gi;
                        *w -= lr * gi / (a.sqrt() + EPS);
                    }
                    OptimizerKind::AdaGrad => {
                        *a += gi * gi;
                        *w -= lr * gi / (a.sqrt() + EPS);
                    }
                }
            }
        }
        self.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngState;
    use crate::nn::{MeanActivation, VarianceMode};

    fn net() -> MlpParams {
        MlpParams::new(&[3, 2, 2], MeanActivation::Identity, VarianceMode::Learned, &mut RngState::new(9))
            .unwrap()
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::RmsProp { decay: 0.9 }, OptimizerKind::AdaGrad] {
            let mut p = net();
            let before = p.clone();
            let mut st = OptimizerState::new(kind, 0.1, &p);
            let g = p.zeros_like();
            st.step(&mut p, &g).unwrap();
            assert_eq!(p, before);
            assert_eq!(st.steps(), 1);
        }
    }

    fn bowl(kind: OptimizerKind, lr: f64, steps: usize) -> f64 {
        let mut w = [1.0];
        let mut st = OptimizerState::with_shapes(kind, lr, [1]);
        for _ in 0..steps {
            let g = [w[0]];
            st.step_slices(&mut [&mut w[..]], &[&g[..]]).unwrap();
        }
        w[0]
    }

    #[test]
    fn quadratic_bowl_converges() {
        assert!(bowl(OptimizerKind::Sgd, 0.1, 200).abs() < 1e-3);
        // adaptive methods move towards the minimum as well
        assert!(bowl(OptimizerKind::AdaGrad, 0.1, 200).abs() < 0.01);
        assert!(bowl(OptimizerKind::RmsProp { decay: 0.9 }, 0.01, 2000).abs() < 0.01);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut p = net();
        let other = MlpParams::new(&[3, 4, 2], MeanActivation::Identity, VarianceMode::Learned, &mut RngState::new(1))
            .unwrap();
        let mut st = OptimizerState::new(OptimizerKind::Sgd, 0.1, &p);
        assert!(st.step(&mut p, &other).is_err());
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let run = || {
            let mut p = net();
            let mut st = OptimizerState::new(OptimizerKind::RmsProp { decay: 0.9 }, 1e-3, &p);
            let mut rng = RngState::new(4);
            for _ in 0..20 {
                let mut g = p.zeros_like();
                for t in g.tensors_mut() {
                    t.iter_mut().for_each(|v| *v = rng.normal());
                }
                st.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
