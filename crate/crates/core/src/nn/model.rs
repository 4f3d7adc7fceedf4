use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Layer;
use super::{Mode, ModelConfig, NnError, Real, Tensor};

/// Instantiated layer stack. The network output is mapped through a fixed
/// affine `shift + scale * y` so a model can regress labels in physical
/// units while its last layer works at unit scale.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    layers: Vec<Layer<T>>,
    output_shift: f64,
    output_scale: f64,
    dropout_rng: ChaCha8Rng,
    cached: bool,
}

impl<T: Real> Model<T> {
    /// Builds a scalar-output model, initializing weights from `init_seed`.
    pub fn new(config: ModelConfig) -> Result<Self, NnError> {
        config.validate()?;
        Self::with_any_output(config)
    }

    /// Like [`Model::new`] but accepts any output shape; used to exercise
    /// single layers.
    pub fn with_any_output(config: ModelConfig) -> Result<Self, NnError> {
        let shapes = config.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let layers = config
            .layers
            .iter()
            .zip(&shapes)
            .enumerate()
            .map(|(i, (spec, shape))| Layer::build(spec, shape, &mut rng).map_err(|e| e.at_layer(i)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            layers,
            output_shift: 0.0,
            output_scale: 1.0,
            dropout_rng: ChaCha8Rng::seed_from_u64(config.init_seed ^ 0xD809_0075),
            cached: false,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn set_output_affine(&mut self, shift: f64, scale: f64) {
        self.output_shift = shift;
        self.output_scale = scale;
    }

    pub fn output_affine(&self) -> (f64, f64) {
        (self.output_shift, self.output_scale)
    }

    /// Reseeds the generator behind dropout masks.
    pub fn set_dropout_seed(&mut self, seed: u64) {
        self.dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// `training = true` runs [`Mode::Train`], otherwise [`Mode::Eval`].
    pub fn forward(&mut self, input: &Tensor<T>, training: bool) -> Result<Tensor<T>, NnError> {
        self.forward_mode(input.clone(), if training { Mode::Train } else { Mode::Eval })
    }

    /// Forward pass over a batch shaped `[batch, input_shape...]`.
    pub fn forward_mode(&mut self, input: Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        if input.shape().len() != self.config.input_shape.len() + 1
            || input.shape()[1..] != self.config.input_shape[..]
        {
            let mut expected = vec![input.batch()];
            expected.extend_from_slice(&self.config.input_shape);
            return Err(NnError::ShapeMismatch {
                layer: Some(0),
                expected,
                got: input.shape().to_vec(),
            });
        }
        if input.batch() == 0 {
            return Err(NnError::EmptyBatch);
        }
        self.cached = false;
        let mut x = input;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            x = layer.forward(x, mode, &mut self.dropout_rng).map_err(|e| e.at_layer(i))?;
        }
        if self.output_shift != 0.0 || self.output_scale != 1.0 {
            let (shift, scale) = (T::from_f64(self.output_shift), T::from_f64(self.output_scale));
            x.data_mut().iter_mut().for_each(|v| *v = shift + scale * *v);
        }
        self.cached = mode.keeps_cache();
        Ok(x)
    }

    /// Accumulates parameter gradients for `d loss / d output` and returns the
    /// gradient with respect to the input.
    pub fn backward(&mut self, loss_grad: Tensor<T>) -> Result<Tensor<T>, NnError> {
        if !self.cached {
            return Err(NnError::NoForwardState { layer: None });
        }
        self.cached = false;
        let mut g = loss_grad;
        if self.output_scale != 1.0 {
            let scale = T::from_f64(self.output_scale);
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            g = layer.backward(g).map_err(|e| e.at_layer(i))?;
        }
        Ok(g)
    }

    /// ReLU states and max-pool winners recorded by the last caching forward
    /// pass; empty after an `Eval` forward.
    pub fn switch_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.layers.iter().for_each(|l| l.switch_pattern(&mut out));
        out
    }

    pub fn clear_cache(&mut self) {
        self.cached = false;
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::zero_grad);
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        self.layers.iter().for_each(|l| l.params(&mut out));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.layers.iter_mut().for_each(|l| l.params_mut(&mut out));
        out
    }

    pub fn buffers(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        self.layers.iter().for_each(|l| l.buffers(&mut out));
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.layers.iter_mut().for_each(|l| l.buffers_mut(&mut out));
        out
    }

    /// Zeroes the parameters of the last layer that has any.
    pub fn zero_output_layer(&mut self) {
        if let Some(layer) = self.layers.iter_mut().rev().find(|l| {
            let mut ps = Vec::new();
            l.params(&mut ps);
            !ps.is_empty()
        }) {
            let mut ps = Vec::new();
            layer.params_mut(&mut ps);
            ps.into_iter().for_each(|p| p.data_mut().fill(T::zero()));
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Copies of all parameter and buffer values.
    pub fn state(&self) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        (
            self.params().iter().map(|p| p.data().to_vec()).collect(),
            self.buffers().iter().map(|b| b.data().to_vec()).collect(),
        )
    }

    pub fn load_state(&mut self, params: &[Vec<T>], buffers: &[Vec<T>]) -> Result<(), NnError> {
        fn fill<T: Real>(dst: Vec<&mut Tensor<T>>, src: &[Vec<T>], what: &str) -> Result<(), NnError> {
            if dst.len() != src.len() {
                return Err(NnError::config(format!("expected {} {what} tensors, got {}", dst.len(), src.len())));
            }
            for (i, (d, s)) in dst.into_iter().zip(src).enumerate() {
                if d.len() != s.len() {
                    return Err(NnError::config(format!(
                        "{what} tensor {i} has {} values, expected {}",
                        s.len(),
                        d.len()
                    )));
                }
                d.data_mut().copy_from_slice(s);
            }
            Ok(())
        }
        fill(self.params_mut(), params, "parameter")?;
        fill(self.buffers_mut(), buffers, "buffer")
    }

    /// Same model at another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut out = Model::<U>::with_any_output(self.config.clone()).expect("config already validated");
        let conv = |v: Vec<Vec<T>>| -> Vec<Vec<U>> {
            v.into_iter().map(|t| t.into_iter().map(|x| U::from_f64(x.to_f64())).collect()).collect()
        };
        let (p, b) = self.state();
        out.load_state(&conv(p), &conv(b)).expect("same layout");
        out.output_shift = self.output_shift;
        out.output_scale = self.output_scale;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mse_loss, LayerSpec};

    fn linear(inputs: usize) -> Model<f64> {
        Model::new(ModelConfig {
            layers: vec![LayerSpec::Dense { inputs, outputs: 1 }],
            input_shape: vec![inputs],
            init_seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn zero_weight_head_emits_bias() {
        let mut m = Model::<f64>::new(ModelConfig {
            layers: vec![
                LayerSpec::Dense { inputs: 3, outputs: 4 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 4, outputs: 1 },
            ],
            input_shape: vec![3],
            init_seed: 1,
        })
        .unwrap();
        let mut params = m.params_mut();
        params[2].data_mut().fill(0.0);
        params[3].data_mut()[0] = 1.75;
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.1, -9.0]).unwrap();
        assert_eq!(m.forward(&x, false).unwrap().data(), &[1.75, 1.75]);
    }

    #[test]
    fn dense_mse_gradient_closed_form() {
        let mut m = linear(3);
        let x = Tensor::from_vec(&[4, 3], vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0, -2.0, 1.0, 1.0, 0.3, -0.7, 2.0]).unwrap();
        let y = Tensor::from_vec(&[4, 1], vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let pred = m.forward(&x, true).unwrap();
        let (_, grad) = mse_loss(&pred, &y).unwrap();
        m.zero_grad();
        m.backward(grad).unwrap();
        let params = m.params();
        for j in 0..3 {
            let want: f64 = (0..4)
                .map(|b| 2.0 * (pred.data()[b] - y.data()[b]) * x.data()[b * 3 + j] / 4.0)
                .sum();
            assert!((params[0].grad().unwrap()[j] - want).abs() < 1e-12);
        }
        let want_b: f64 = (0..4).map(|b| 2.0 * (pred.data()[b] - y.data()[b]) / 4.0).sum();
        assert!((params[1].grad().unwrap()[0] - want_b).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_gradient_gives_zero_grads() {
        let mut m = Model::<f64>::new(crate::nn::build_cnn1d(16).unwrap()).unwrap();
        let x = Tensor::full(&[2, 1, 16], 0.3);
        m.forward(&x, true).unwrap();
        m.zero_grad();
        m.backward(Tensor::zeros(&[2, 1])).unwrap();
        assert!(m.params().iter().all(|p| p.grad().unwrap().iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn backward_requires_training_forward() {
        let mut m = linear(2);
        let x = Tensor::full(&[1, 2], 1.0);
        assert!(matches!(m.backward(Tensor::zeros(&[1, 1])), Err(NnError::NoForwardState { .. })));
        m.forward(&x, false).unwrap();
        assert!(matches!(m.backward(Tensor::zeros(&[1, 1])), Err(NnError::NoForwardState { .. })));
        m.forward(&x, true).unwrap();
        assert!(m.backward(Tensor::zeros(&[1, 1])).is_ok());
    }

    #[test]
    fn input_shape_checked() {
        let mut m = linear(2);
        let err = m.forward(&Tensor::full(&[1, 3], 1.0), false).unwrap_err();
        assert!(matches!(err, NnError::ShapeMismatch { layer: Some(0), .. }));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut m = Model::<f32>::new(crate::nn::build_gaf_resnet_toy(16).unwrap()).unwrap();
        let x = Tensor::from_vec(&[2, 1, 16, 16], (0..512).map(|i| (i as f32 * 0.1).sin()).collect()).unwrap();
        let a = m.forward(&x, false).unwrap();
        let b = m.forward(&x, false).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn residual_block_with_zero_convs_is_relu_of_input() {
        let conv = |f| LayerSpec::Conv2d { filters: f, kernel: 3, stride: 1, bias: false };
        let mut m = Model::<f64>::with_any_output(ModelConfig {
            layers: vec![LayerSpec::ResidualBlock {
                inner: vec![conv(2), LayerSpec::BatchNorm { features: 2 }, LayerSpec::Relu, conv(2)],
                projection: false,
            }],
            input_shape: vec![2, 3, 3],
            init_seed: 2,
        })
        .unwrap();
        for p in m.params_mut() {
            if p.shape().len() == 2 {
                p.data_mut().fill(0.0);
            }
        }
        let data: Vec<f64> = (0..18).map(|i| (i as f64 - 9.0) * 0.3).collect();
        let x = Tensor::from_vec(&[1, 2, 3, 3], data.clone()).unwrap();
        let y = m.forward(&x, false).unwrap();
        let want: Vec<f64> = data.iter().map(|v| v.max(0.0)).collect();
        assert_eq!(y.data(), &want[..]);
    }

    #[test]
    fn state_round_trip_and_cast() {
        let m = Model::<f32>::new(crate::nn::build_cnn1d(16).unwrap()).unwrap();
        let (p, b) = m.state();
        let mut other = Model::<f32>::new(ModelConfig { init_seed: 99, ..m.config().clone() }).unwrap();
        assert_ne!(other.state().0, p);
        other.load_state(&p, &b).unwrap();
        assert_eq!(other.state(), (p, b));
        let wide: Model<f64> = m.cast();
        assert_eq!(wide.param_count(), m.param_count());
    }
}
