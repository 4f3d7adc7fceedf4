use super::BenchError;

/// Mean relative error in percent: `mean(|predicted - truth| / truth) * 100`.
pub fn mean_relative_error(predicted: &[f64], truth: &[f64]) -> Result<f64, BenchError> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(BenchError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if let Some(index) = truth.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(BenchError::NonPositiveTruth {
            index,
            value: truth[index],
        });
    }
    let sum: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs() / t)
        .sum();
    Ok(sum / truth.len() as f64 * 100.0)
}
