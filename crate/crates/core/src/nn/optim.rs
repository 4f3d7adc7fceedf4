use serde::{Deserialize, Serialize};

use super::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Plain SGD or bias-corrected Adam over a fixed parameter list.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update using the gradients stored on `params`. Parameters
    /// without a gradient buffer count as zero gradient.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>) {
        self.step += 1;
        let lr = T::from_f64(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params {
                    let (data, grad) = p.data_and_grad_mut();
                    for (w, &g) in data.iter_mut().zip(grad.iter()) {
                        *w -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
                    self.v = self.m.clone();
                }
                let (b1, b2) = (T::from_f64(ADAM_BETA1), T::from_f64(ADAM_BETA2));
                let bc1 = T::from_f64(1.0 - ADAM_BETA1.powi(self.step));
                let bc2 = T::from_f64(1.0 - ADAM_BETA2.powi(self.step));
                let eps = T::from_f64(ADAM_EPS);
                for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
                    let (data, grad) = p.data_and_grad_mut();
                    for (((w, &g), mi), vi) in data.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = b1 * *mi + (T::one() - b1) * g;
                        *vi = b2 * *vi + (T::one() - b2) * g * g;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
