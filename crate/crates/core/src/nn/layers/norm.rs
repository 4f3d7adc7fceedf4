use crate::nn::{Mode, NnError, Real, Tensor};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over the batch and all spatial positions.
#[derive(Debug, Clone)]
pub(crate) struct BatchNorm<T> {
    features: usize,
    pub(crate) gamma: Tensor<T>,
    pub(crate) beta: Tensor<T>,
    pub(crate) running_mean: Tensor<T>,
    pub(crate) running_var: Tensor<T>,
    cache: Option<(Tensor<T>, Vec<T>)>,
}

impl<T: Real> BatchNorm<T> {
    pub(crate) fn new(features: usize) -> Self {
        Self {
            features,
            gamma: Tensor::full(&[features], T::one()),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], T::one()),
            cache: None,
        }
    }

    fn layout(&self, x: &Tensor<T>) -> Result<(usize, usize), NnError> {
        if x.shape().len() < 2 || x.shape()[1] != self.features {
            return Err(NnError::ShapeMismatch {
                layer: None,
                expected: vec![self.features],
                got: x.shape().to_vec(),
            });
        }
        Ok((x.batch(), x.item_len() / self.features))
    }

    pub(crate) fn forward(&mut self, mut x: Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        let (batch, spatial) = self.layout(&x)?;
        let c = self.features;
        let n = batch * spatial;
        let eps = T::from_f64(BN_EPS);
        if mode == Mode::Eval {
            for ch in 0..c {
                let inv = T::one() / (self.running_var.data()[ch] + eps).sqrt();
                let scale = self.gamma.data()[ch] * inv;
                let shift = self.beta.data()[ch] - self.running_mean.data()[ch] * scale;
                for b in 0..batch {
                    let row = &mut x.data_mut()[(b * c + ch) * spatial..(b * c + ch + 1) * spatial];
                    row.iter_mut().for_each(|v| *v = *v * scale + shift);
                }
            }
            self.cache = None;
            return Ok(x);
        }
        let nt = T::from_f64(n as f64);
        let mut inv_std = Vec::with_capacity(c);
        let mut xhat = x.clone();
        for ch in 0..c {
            let rows = |b: usize| (b * c + ch) * spatial..(b * c + ch + 1) * spatial;
            let mean = (0..batch).map(|b| x.data()[rows(b)].iter().copied().sum::<T>()).sum::<T>() / nt;
            let var = (0..batch)
                .map(|b| x.data()[rows(b)].iter().map(|&v| (v - mean) * (v - mean)).sum::<T>())
                .sum::<T>()
                / nt;
            let inv = T::one() / (var + eps).sqrt();
            let (g, bt) = (self.gamma.data()[ch], self.beta.data()[ch]);
            for b in 0..batch {
                let r = rows(b);
                for (h, o) in xhat.data_mut()[r.clone()].iter_mut().zip(&mut x.data_mut()[r]) {
                    *h = (*h - mean) * inv;
                    *o = g * *h + bt;
                }
            }
            if mode == Mode::Train {
                let m = T::from_f64(BN_MOMENTUM);
                let unbiased = if n > 1 { var * nt / T::from_f64((n - 1) as f64) } else { var };
                let rm = &mut self.running_mean.data_mut()[ch];
                *rm = (T::one() - m) * *rm + m * mean;
                let rv = &mut self.running_var.data_mut()[ch];
                *rv = (T::one() - m) * *rv + m * unbiased;
            }
            inv_std.push(inv);
        }
        self.cache = Some((xhat, inv_std));
        Ok(x)
    }

    pub(crate) fn backward(&mut self, mut dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (xhat, inv_std) = self.cache.take().ok_or(NnError::NoForwardState { layer: None })?;
        let (batch, spatial) = self.layout(&xhat)?;
        let c = self.features;
        let nt = T::from_f64((batch * spatial) as f64);
        for ch in 0..c {
            let rows = |b: usize| (b * c + ch) * spatial..(b * c + ch + 1) * spatial;
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for b in 0..batch {
                for (&d, &h) in dy.data()[rows(b)].iter().zip(&xhat.data()[rows(b)]) {
                    sum_dy += d;
                    sum_dy_xhat += d * h;
                }
            }
            self.gamma.grad_mut()[ch] += sum_dy_xhat;
            self.beta.grad_mut()[ch] += sum_dy;
            let k = self.gamma.data()[ch] * inv_std[ch] / nt;
            for b in 0..batch {
                let r = rows(b);
                for (d, &h) in dy.data_mut()[r.clone()].iter_mut().zip(&xhat.data()[r]) {
                    *d = k * (nt * *d - sum_dy - h * sum_dy_xhat);
                }
            }
        }
        Ok(dy)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}
