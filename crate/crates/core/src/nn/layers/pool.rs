use crate::nn::{Mode, NnError, Real, Tensor};

/// Non-overlapping max pooling (window = stride = `size`, trailing
/// remainder dropped). Ties resolve to the first index in scan order.
#[derive(Debug, Clone)]
pub(crate) struct MaxPool {
    two_d: bool,
    size: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool {
    pub(crate) fn switch_pattern(&self, out: &mut Vec<usize>) {
        if let Some((argmax, _)) = &self.cache {
            out.extend(argmax);
        }
    }

    pub(crate) fn new(two_d: bool, size: usize) -> Self {
        Self { two_d, size, cache: None }
    }

    pub(crate) fn forward<T: Real>(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        let shape = x.shape().to_vec();
        if shape.len() != if self.two_d { 4 } else { 3 } {
            return Err(NnError::ShapeMismatch {
                layer: None,
                expected: vec![0; if self.two_d { 4 } else { 3 }],
                got: shape,
            });
        }
        let (h, w) = if self.two_d { (shape[2], shape[3]) } else { (1, shape[2]) };
        let ph = if self.two_d { self.size } else { 1 };
        let pw = self.size;
        let (oh, ow) = (h / ph, w / pw);
        let planes = shape[0] * shape[1];
        let mut out_shape = shape.clone();
        if self.two_d {
            out_shape[2] = oh;
            out_shape[3] = ow;
        } else {
            out_shape[2] = ow;
        }
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + i * ph * w + j * pw;
                    for a in 0..ph {
                        for b in 0..pw {
                            let idx = base + (i * ph + a) * w + j * pw + b;
                            if x.data()[idx] > x.data()[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x.data()[best]);
                    argmax.push(best);
                }
            }
        }
        self.cache = mode.keeps_cache().then_some((argmax, shape));
        Tensor::from_vec(&out_shape, out)
    }

    pub(crate) fn backward<T: Real>(&mut self, dy: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (argmax, shape) = self.cache.take().ok_or(NnError::NoForwardState { layer: None })?;
        let mut dx = Tensor::zeros(&shape);
        for (&idx, &g) in argmax.iter().zip(dy.data()) {
            dx.data_mut()[idx] += g;
        }
        Ok(dx)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_gradient_to_first_argmax() {
        let mut pool = MaxPool::new(false, 2);
        let x = Tensor::<f64>::from_vec(&[1, 1, 5], vec![1.0, 3.0, 2.0, 2.0, 9.0]).unwrap();
        let y = pool.forward(x, Mode::Train).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
        let dx = pool.backward(Tensor::from_vec(&[1, 1, 2], vec![10.0, 20.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[0.0, 10.0, 20.0, 0.0, 0.0]);
    }

    #[test]
    fn pool_2d() {
        let mut pool = MaxPool::new(true, 2);
        let x = Tensor::<f64>::from_vec(&[1, 1, 2, 4], vec![1.0, 5.0, 7.0, 7.0, 4.0, 2.0, 0.0, 8.0]).unwrap();
        let y = pool.forward(x, Mode::Train).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 2]);
        assert_eq!(y.data(), &[5.0, 8.0]);
        let dx = pool.backward(Tensor::from_vec(&[1, 1, 1, 2], vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
