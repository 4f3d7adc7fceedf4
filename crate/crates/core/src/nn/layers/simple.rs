use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{Mode, NnError, Real, Tensor};

#[derive(Debug, Clone, Default)]
pub(crate) struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub(crate) fn switch_pattern(&self, out: &mut Vec<usize>) {
        if let Some(mask) = &self.mask {
            out.extend(mask.iter().map(|&on| on as usize));
        }
    }

    pub(crate) fn forward<T: Real>(&mut self, mut x: Tensor<T>, mode: Mode) -> Tensor<T> {
        let mut mask = Vec::with_capacity(if mode.keeps_cache() { x.len() } else { 0 });
        for v in x.data_mut() {
            let on = *v > T::zero();
            if !on {
                *v = T::zero();
            }
            if mode.keeps_cache() {
                mask.push(on);
            }
        }
        self.mask = mode.keeps_cache().then_some(mask);
        x
    }

    pub(crate) fn backward<T: Real>(&mut self, mut dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mask = self.mask.take().ok_or(NnError::NoForwardState { layer: None })?;
        for (d, on) in dy.data_mut().iter_mut().zip(mask) {
            if !on {
                *d = T::zero();
            }
        }
        Ok(dy)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.mask = None;
    }
}

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)` during
/// training, so evaluation is the identity.
#[derive(Debug, Clone)]
pub(crate) struct Dropout<T> {
    rate: f64,
    mask: Option<Vec<T>>,
}

impl<T: Real> Dropout<T> {
    pub(crate) fn new(rate: f64) -> Self {
        Self { rate, mask: None }
    }

    pub(crate) fn forward(&mut self, mut x: Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Tensor<T> {
        if mode != Mode::Train || self.rate == 0.0 {
            self.mask = mode.keeps_cache().then(|| vec![T::one(); x.len()]);
            return x;
        }
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.random::<f64>() < self.rate { T::zero() } else { keep })
            .collect();
        for (v, &m) in x.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        x
    }

    pub(crate) fn backward(&mut self, mut dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mask = self.mask.take().ok_or(NnError::NoForwardState { layer: None })?;
        for (d, m) in dy.data_mut().iter_mut().zip(mask) {
            *d *= m;
        }
        Ok(dy)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.mask = None;
    }
}

/// `[B, C, ...] -> [B, C]` by averaging over all trailing axes.
#[derive(Debug, Clone, Default)]
pub(crate) struct GlobalAvgPool {
    shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub(crate) fn forward<T: Real>(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        if x.shape().len() < 3 {
            return Err(NnError::ShapeMismatch {
                layer: None,
                expected: vec![0, 0, 0],
                got: x.shape().to_vec(),
            });
        }
        let (batch, channels) = (x.shape()[0], x.shape()[1]);
        let spatial = x.item_len() / channels;
        let inv = T::from_f64(1.0 / spatial as f64);
        let out = x.data().chunks(spatial).map(|c| c.iter().copied().sum::<T>() * inv).collect();
        self.shape = mode.keeps_cache().then(|| x.shape().to_vec());
        Tensor::from_vec(&[batch, channels], out)
    }

    pub(crate) fn backward<T: Real>(&mut self, dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let shape = self.shape.take().ok_or(NnError::NoForwardState { layer: None })?;
        let spatial: usize = shape[2..].iter().product();
        let inv = T::from_f64(1.0 / spatial as f64);
        let data = dy.data().iter().flat_map(|&g| std::iter::repeat_n(g * inv, spatial)).collect();
        Tensor::from_vec(&shape, data)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.shape = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn relu_clamps_and_masks() {
        let mut relu = Relu::default();
        let y = relu.forward(Tensor::<f64>::from_vec(&[1, 2], vec![-1.0, 2.0]).unwrap(), Mode::Train);
        assert_eq!(y.data(), &[0.0, 2.0]);
        let dx = relu.backward(Tensor::from_vec(&[1, 2], vec![5.0, 7.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[0.0, 7.0]);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut drop = Dropout::<f64>::new(0.5);
        let x = Tensor::full(&[1, 1000], 1.0);
        assert_eq!(drop.forward(x.clone(), Mode::Eval, &mut rng), x);
        assert_eq!(drop.forward(x.clone(), Mode::Check, &mut rng), x);
        let y = drop.forward(x.clone(), Mode::Train, &mut rng);
        let kept = y.data().iter().filter(|&&v| v == 2.0).count();
        assert_eq!(kept + y.data().iter().filter(|&&v| v == 0.0).count(), 1000);
        assert!((400..600).contains(&kept));
        // backward applies the same mask
        let dx = drop.backward(Tensor::full(&[1, 1000], 1.0)).unwrap();
        assert_eq!(dx, y);
    }

    #[test]
    fn global_average() {
        let mut gap = GlobalAvgPool::default();
        let x = Tensor::<f64>::from_vec(&[1, 2, 2, 1], vec![1.0, 3.0, 4.0, 8.0]).unwrap();
        let y = gap.forward(x, Mode::Train).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[2.0, 6.0]);
        let dx = gap.backward(Tensor::from_vec(&[1, 2], vec![2.0, 4.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[1.0, 1.0, 2.0, 2.0]);
    }
}
