use super::{NnError, Real, Tensor};

/// Mean squared error and its gradient `2 (pred - target) / count`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>), NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch {
            layer: None,
            expected: pred.shape().to_vec(),
            got: target.shape().to_vec(),
        });
    }
    if pred.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let n = pred.len() as f64;
    let scale = T::from_f64(2.0 / n);
    let mut sum = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.to_f64() * d.to_f64();
            d * scale
        })
        .collect();
    Ok((sum / n, Tensor::from_vec(pred.shape(), grad)?))
}
