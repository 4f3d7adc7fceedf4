use rand_chacha::ChaCha8Rng;

use super::he_uniform;
use crate::nn::{gemm, Mode, NnError, Real, Tensor};

/// Fully connected layer `y = x W^T + b` on the flattened input; `W` is
/// `[outputs, inputs]`.
#[derive(Debug, Clone)]
pub(crate) struct Dense<T> {
    inputs: usize,
    outputs: usize,
    pub(crate) weight: Tensor<T>,
    pub(crate) bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub(crate) fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            inputs,
            outputs,
            weight: he_uniform(&[outputs, inputs], inputs, rng),
            bias: Tensor::zeros(&[outputs]),
            input: None,
        }
    }

    pub(crate) fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        if x.item_len() != self.inputs {
            return Err(NnError::ShapeMismatch {
                layer: None,
                expected: vec![self.inputs],
                got: x.shape().to_vec(),
            });
        }
        let batch = x.batch();
        let mut y = Tensor::zeros(&[batch, self.outputs]);
        for row in y.data_mut().chunks_mut(self.outputs) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(false, true, batch, self.outputs, self.inputs, T::one(), x.data(), self.weight.data(), T::one(), y.data_mut());
        self.input = mode.keeps_cache().then_some(x);
        Ok(y)
    }

    pub(crate) fn backward(&mut self, dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self.input.take().ok_or(NnError::NoForwardState { layer: None })?;
        let batch = x.batch();
        gemm(true, false, self.outputs, self.inputs, batch, T::one(), dy.data(), x.data(), T::one(), self.weight.grad_mut());
        let gb = self.bias.grad_mut();
        for row in dy.data().chunks(self.outputs) {
            for (g, &d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(x.shape());
        gemm(false, false, batch, self.inputs, self.outputs, T::one(), dy.data(), self.weight.data(), T::zero(), dx.data_mut());
        Ok(dx)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.input = None;
    }
}
