use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::mlp::{Grads, Mlp};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Grads,
    pub v: Grads,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    adam: Option<AdamState>,
    /// Coefficient of the `½ Σ θ²` penalty added to every step.
    pub l2: f64,
}

impl Optimizer {
    pub fn sgd() -> Self {
        Optimizer { adam: None, l2: 0.0 }
    }

    pub fn adam(mlp: &Mlp) -> Self {
        Optimizer {
            adam: Some(AdamState { m: Grads::zeros_like(mlp), v: Grads::zeros_like(mlp), step: 0 }),
            l2: 0.0,
        }
    }

    pub fn new(kind: OptimizerKind, mlp: &Mlp) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::sgd(),
            OptimizerKind::Adam => Optimizer::adam(mlp),
        }
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }

    pub fn adam_state(&self) -> Option<&AdamState> {
        self.adam.as_ref()
    }

    pub(crate) fn apply(&mut self, mlp: &mut Mlp, grads: &Grads, lr: f64) {
        match &mut self.adam {
            None => {
                for (w, g) in mlp.weights.iter_mut().zip(&grads.weights) {
                    w.scaled_add(-lr, g);
                }
                for (b, g) in mlp.biases.iter_mut().zip(&grads.biases) {
                    b.scaled_add(-lr, g);
                }
            }
            Some(state) => {
                state.step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
                let update = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
                };
                for l in 0..mlp.weights.len() {
                    Zip::from(&mut mlp.weights[l])
                        .and(&grads.weights[l])
                        .and(&mut state.m.weights[l])
                        .and(&mut state.v.weights[l])
                        .for_each(update);
                    Zip::from(&mut mlp.biases[l])
                        .and(&grads.biases[l])
                        .and(&mut state.m.biases[l])
                        .and(&mut state.v.biases[l])
                        .for_each(update);
                }
            }
        }
    }
}
