mod conv;
mod dense;
mod norm;
mod pool;
mod simple;

pub(crate) use conv::Conv;
pub(crate) use dense::Dense;
pub(crate) use norm::BatchNorm;
pub(crate) use pool::MaxPool;
pub(crate) use simple::{Dropout, GlobalAvgPool, Relu};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LayerSpec, Mode, NnError, Real, Tensor};

/// He-uniform init, bound `sqrt(6 / fan_in)`.
pub(crate) fn he_uniform<T: Real>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

#[derive(Debug, Clone)]
pub(crate) struct Residual<T> {
    inner: Vec<Layer<T>>,
    skip: Vec<Layer<T>>,
    mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub(crate) enum Layer<T> {
    Conv(Conv<T>),
    BatchNorm(BatchNorm<T>),
    Relu(Relu),
    MaxPool(MaxPool),
    Dense(Dense<T>),
    Dropout(Dropout<T>),
    GlobalAvgPool(GlobalAvgPool),
    Residual(Residual<T>),
}

impl<T: Real> Layer<T> {
    /// Instantiates `spec` for per-sample input `shape`, drawing weights from
    /// `rng` in declaration order.
    pub(crate) fn build(spec: &LayerSpec, shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        spec.output_shape(shape)?;
        Ok(match spec {
            LayerSpec::Conv1d { filters, kernel, stride, bias } => {
                Layer::Conv(Conv::new(false, shape[0], *filters, *kernel, *stride, *bias, rng))
            }
            LayerSpec::Conv2d { filters, kernel, stride, bias } => {
                Layer::Conv(Conv::new(true, shape[0], *filters, *kernel, *stride, *bias, rng))
            }
            LayerSpec::BatchNorm { features } => Layer::BatchNorm(BatchNorm::new(*features)),
            LayerSpec::Relu => Layer::Relu(Relu::default()),
            LayerSpec::MaxPool1d { size } => Layer::MaxPool(MaxPool::new(false, *size)),
            LayerSpec::MaxPool2d { size } => Layer::MaxPool(MaxPool::new(true, *size)),
            LayerSpec::Dense { inputs, outputs } => Layer::Dense(Dense::new(*inputs, *outputs, rng)),
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(*rate)),
            LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool(GlobalAvgPool::default()),
            LayerSpec::ResidualBlock { inner, projection } => {
                let build_chain = |specs: &[LayerSpec], rng: &mut ChaCha8Rng| {
                    let mut s = shape.to_vec();
                    let mut layers = Vec::with_capacity(specs.len());
                    for spec in specs {
                        layers.push(Layer::build(spec, &s, rng)?);
                        s = spec.output_shape(&s)?;
                    }
                    Ok::<_, NnError>(layers)
                };
                let inner = build_chain(inner, rng)?;
                let skip = match projection {
                    true => build_chain(&spec.projection_specs(shape)?, rng)?,
                    false => Vec::new(),
                };
                Layer::Residual(Residual { inner, skip, mask: None })
            }
        })
    }

    pub(crate) fn forward(&mut self, x: Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>, NnError> {
        match self {
            Layer::Conv(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x, mode)),
            Layer::MaxPool(l) => l.forward(x, mode),
            Layer::Dense(l) => l.forward(x, mode),
            Layer::Dropout(l) => Ok(l.forward(x, mode, rng)),
            Layer::GlobalAvgPool(l) => l.forward(x, mode),
            Layer::Residual(block) => {
                let mut skip = x.clone();
                for l in &mut block.skip {
                    skip = l.forward(skip, mode, rng)?;
                }
                let mut y = x;
                for l in &mut block.inner {
                    y = l.forward(y, mode, rng)?;
                }
                if y.shape() != skip.shape() {
                    return Err(NnError::ShapeMismatch {
                        layer: None,
                        expected: y.shape().to_vec(),
                        got: skip.shape().to_vec(),
                    });
                }
                let keep = mode.keeps_cache();
                let mut mask = Vec::with_capacity(if keep { y.len() } else { 0 });
                for (v, &s) in y.data_mut().iter_mut().zip(skip.data()) {
                    *v += s;
                    let on = *v > T::zero();
                    if !on {
                        *v = T::zero();
                    }
                    if keep {
                        mask.push(on);
                    }
                }
                block.mask = keep.then_some(mask);
                Ok(y)
            }
        }
    }

    pub(crate) fn backward(&mut self, dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        match self {
            Layer::Conv(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::MaxPool(l) => l.backward(dy),
            Layer::Dense(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::GlobalAvgPool(l) => l.backward(dy),
            Layer::Residual(block) => {
                let mask = block.mask.take().ok_or(NnError::NoForwardState { layer: None })?;
                let mut g = dy;
                for (d, on) in g.data_mut().iter_mut().zip(mask) {
                    if !on {
                        *d = T::zero();
                    }
                }
                let mut dskip = g.clone();
                for l in block.skip.iter_mut().rev() {
                    dskip = l.backward(dskip)?;
                }
                let mut dx = g;
                for l in block.inner.iter_mut().rev() {
                    dx = l.backward(dx)?;
                }
                for (d, &s) in dx.data_mut().iter_mut().zip(dskip.data()) {
                    *d += s;
                }
                Ok(dx)
            }
        }
    }

    /// ReLU on/off states and max-pool winners of the cached forward pass,
    /// the discrete choices at which the network is not differentiable.
    pub(crate) fn switch_pattern(&self, out: &mut Vec<usize>) {
        match self {
            Layer::Relu(l) => l.switch_pattern(out),
            Layer::MaxPool(l) => l.switch_pattern(out),
            Layer::Residual(block) => {
                block.inner.iter().chain(&block.skip).for_each(|l| l.switch_pattern(out));
                if let Some(mask) = &block.mask {
                    out.extend(mask.iter().map(|&on| on as usize));
                }
            }
            _ => {}
        }
    }

    pub(crate) fn clear_cache(&mut self) {
        match self {
            Layer::Conv(l) => l.clear_cache(),
            Layer::BatchNorm(l) => l.clear_cache(),
            Layer::Relu(l) => l.clear_cache(),
            Layer::MaxPool(l) => l.clear_cache(),
            Layer::Dense(l) => l.clear_cache(),
            Layer::Dropout(l) => l.clear_cache(),
            Layer::GlobalAvgPool(l) => l.clear_cache(),
            Layer::Residual(block) => {
                block.mask = None;
                block.inner.iter_mut().chain(&mut block.skip).for_each(Layer::clear_cache);
            }
        }
    }

    /// Trainable tensors in declaration order.
    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        match self {
            Layer::Conv(l) => {
                out.push(&mut l.weight);
                if let Some(b) = &mut l.bias {
                    out.push(b);
                }
            }
            Layer::BatchNorm(l) => {
                out.push(&mut l.gamma);
                out.push(&mut l.beta);
            }
            Layer::Dense(l) => {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
            Layer::Residual(block) => {
                for l in block.inner.iter_mut().chain(&mut block.skip) {
                    l.params_mut(out);
                }
            }
            _ => {}
        }
    }

    pub(crate) fn params<'a>(&'a self, out: &mut Vec<&'a Tensor<T>>) {
        match self {
            Layer::Conv(l) => {
                out.push(&l.weight);
                if let Some(b) = &l.bias {
                    out.push(b);
                }
            }
            Layer::BatchNorm(l) => {
                out.push(&l.gamma);
                out.push(&l.beta);
            }
            Layer::Dense(l) => {
                out.push(&l.weight);
                out.push(&l.bias);
            }
            Layer::Residual(block) => {
                for l in block.inner.iter().chain(&block.skip) {
                    l.params(out);
                }
            }
            _ => {}
        }
    }

    /// Non-trainable state (batch-norm running statistics) in declaration order.
    pub(crate) fn buffers_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        match self {
            Layer::BatchNorm(l) => {
                out.push(&mut l.running_mean);
                out.push(&mut l.running_var);
            }
            Layer::Residual(block) => {
                for l in block.inner.iter_mut().chain(&mut block.skip) {
                    l.buffers_mut(out);
                }
            }
            _ => {}
        }
    }

    pub(crate) fn buffers<'a>(&'a self, out: &mut Vec<&'a Tensor<T>>) {
        match self {
            Layer::BatchNorm(l) => {
                out.push(&l.running_mean);
                out.push(&l.running_var);
            }
            Layer::Residual(block) => {
                for l in block.inner.iter().chain(&block.skip) {
                    l.buffers(out);
                }
            }
            _ => {}
        }
    }
}
