use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{mse_loss, Mode, Model, NnError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    pub params_checked: usize,
    pub inputs_checked: usize,
    /// Draws discarded because `p + eps` or `p - eps` changed a ReLU state or
    /// max-pool winner.
    pub kinks_skipped: usize,
    /// Location of the largest error, e.g. `param 3[17]` or `input[5]`.
    pub worst: String,
}

const MAX_DRAWS_PER_SAMPLE: usize = 20;

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares backpropagated gradients with central differences
/// `(L(p + eps) - L(p - eps)) / (2 eps)` for `samples` parameter entries
/// (spread round-robin over all parameter tensors) and `samples` input
/// entries. Draws whose perturbation flips a ReLU or max-pool decision are
/// redrawn, up to 20 draws per requested sample. The loss is the MSE against
/// a fixed random target; the model runs in [`Mode::Check`] so batch norm
/// uses batch statistics without touching running statistics and dropout is
/// off.
pub fn grad_check(
    model: &mut Model<f64>,
    input: &Tensor<f64>,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = model.forward_mode(input.clone(), Mode::Check)?;
    let base_pattern = model.switch_pattern();
    let target_data = (0..out.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let target = Tensor::from_vec(out.shape(), target_data)?;
    let (_, grad) = mse_loss(&out, &target)?;
    model.zero_grad();
    let input_grad = model.backward(grad)?;
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();

    // Loss at a perturbed point, or `None` when the perturbation flips a ReLU
    // or max-pool decision and the central difference straddles a kink.
    let loss_at = |model: &mut Model<f64>, x: Tensor<f64>| -> Result<Option<f64>, NnError> {
        let y = model.forward_mode(x, Mode::Check)?;
        let smooth = model.switch_pattern() == base_pattern;
        Ok(smooth.then_some(mse_loss(&y, &target)?.0))
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        params_checked: 0,
        inputs_checked: 0,
        kinks_skipped: 0,
        worst: String::new(),
    };
    let record = |err: f64, at: String, report: &mut GradCheckReport| {
        if err > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = at;
        }
    };
    let max_draws = samples * MAX_DRAWS_PER_SAMPLE;

    let n_tensors = analytic.len();
    let mut draws = 0;
    while n_tensors > 0 && report.params_checked < samples && draws < max_draws {
        let t = draws % n_tensors;
        draws += 1;
        let i = rng.random_range(0..analytic[t].len());
        let original = model.params()[t].data()[i];
        model.params_mut()[t].data_mut()[i] = original + eps;
        let plus = loss_at(model, input.clone())?;
        model.params_mut()[t].data_mut()[i] = original - eps;
        let minus = loss_at(model, input.clone())?;
        model.params_mut()[t].data_mut()[i] = original;
        let (Some(plus), Some(minus)) = (plus, minus) else {
            report.kinks_skipped += 1;
            continue;
        };
        let numeric = (plus - minus) / (2.0 * eps);
        record(rel_error(analytic[t][i], numeric), format!("param {t}[{i}]"), &mut report);
        report.params_checked += 1;
    }
    let mut draws = 0;
    while report.inputs_checked < samples && draws < max_draws {
        draws += 1;
        let i = rng.random_range(0..input.len());
        let mut x = input.clone();
        x.data_mut()[i] += eps;
        let plus = loss_at(model, x)?;
        let mut x = input.clone();
        x.data_mut()[i] -= eps;
        let minus = loss_at(model, x)?;
        let (Some(plus), Some(minus)) = (plus, minus) else {
            report.kinks_skipped += 1;
            continue;
        };
        let numeric = (plus - minus) / (2.0 * eps);
        record(rel_error(input_grad.data()[i], numeric), format!("input[{i}]"), &mut report);
        report.inputs_checked += 1;
    }
    model.clear_cache();
    Ok(report)
}
