use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mse_loss, Mode, Model, ModelConfig, NnError, Optimizer, OptimizerKind, Real, Tensor};
use crate::gaf;
use crate::hrrp_sim::{DatasetSplit, HrrpSequence, Sample};

const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Seeds mini-batch shuffling and dropout masks.
    pub seed: u64,
    /// Maps the network output through `mean + std * y` using train-label
    /// statistics, so the last layer regresses standardized labels.
    pub standardize_targets: bool,
    /// Restores the weights of the epoch with the lowest validation loss
    /// before predicting on the test split.
    pub restore_best: bool,
    /// Zeroes the last layer before the first epoch, so training starts
    /// from the train-label mean. Without it, Adam's first steps on a wide
    /// dense layer can switch off every hidden ReLU for good.
    pub zero_init_head: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            standardize_targets: true,
            restore_best: true,
            zero_init_head: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(NnError::InvalidTrainConfig(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NnError::InvalidTrainConfig("epochs and batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean mini-batch MSE per epoch, meters squared.
    pub train_loss: Vec<f64>,
    /// Validation MSE per epoch in evaluation mode, meters squared.
    pub val_loss: Vec<f64>,
    /// `(predicted, true)` radial length for every test sample, meters.
    pub test_predictions: Vec<(f64, f64)>,
    pub test_ids: Vec<usize>,
    /// Epoch whose weights produced the test predictions.
    pub final_epoch: usize,
    pub wall_seconds: f64,
}

/// Parameter and buffer values, as returned by [`Model::state`].
type State<T> = (Vec<Vec<T>>, Vec<Vec<T>>);

/// How profiles become network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputEncoding {
    /// `[1, n]` profile divided by its maximum amplitude.
    Profile { len: usize },
    /// `[1, side, side]` Gramian angular field image.
    Gaf { side: usize },
}

impl InputEncoding {
    /// Encoding implied by a model's input shape.
    pub fn for_model(config: &ModelConfig) -> Result<Self, NnError> {
        match config.input_shape[..] {
            [1, len] => Ok(InputEncoding::Profile { len }),
            [1, h, w] if h == w => Ok(InputEncoding::Gaf { side: h }),
            _ => Err(NnError::config(format!(
                "no input encoding produces shape {:?}",
                config.input_shape
            ))),
        }
    }

    pub fn item_len(&self) -> usize {
        match self {
            InputEncoding::Profile { len } => *len,
            InputEncoding::Gaf { side } => side * side,
        }
    }
}

/// Encodes one profile, appending `item_len` values to `out`.
pub fn encode_input<T: Real>(hrrp: &HrrpSequence, encoding: InputEncoding, out: &mut Vec<T>) -> Result<(), gaf::GafError> {
    match encoding {
        InputEncoding::Profile { len } => {
            if hrrp.len() != len {
                return Err(gaf::GafError::BadTargetLength { len: hrrp.len(), target: len });
            }
            let max = hrrp.max_amplitude();
            let inv = if max > 0.0 { 1.0 / max } else { 0.0 };
            out.extend(hrrp.bins.iter().map(|&v| T::from_f64(v * inv)));
        }
        InputEncoding::Gaf { side } => {
            let image = gaf::encode(hrrp, side)?;
            out.extend(image.matrix.iter().map(|&v| T::from_f64(v)));
        }
    }
    Ok(())
}

fn batch_tensor<T: Real>(samples: &[&Sample], encoding: InputEncoding) -> Result<Tensor<T>, NnError> {
    let mut data = Vec::with_capacity(samples.len() * encoding.item_len());
    for s in samples {
        encode_input(&s.hrrp, encoding, &mut data).map_err(|source| NnError::Encoding { sample: s.id, source })?;
    }
    let mut shape = vec![samples.len(), 1];
    match encoding {
        InputEncoding::Profile { len } => shape.push(len),
        InputEncoding::Gaf { side } => shape.extend([side, side]),
    }
    Tensor::from_vec(&shape, data)
}

fn label_tensor<T: Real>(samples: &[&Sample]) -> Tensor<T> {
    let data = samples.iter().map(|s| T::from_f64(s.label)).collect();
    Tensor::from_vec(&[samples.len(), 1], data).expect("one label per sample")
}

/// Evaluation-mode predictions in meters, one per sample.
pub fn predict<T: Real>(model: &mut Model<T>, samples: &[Sample]) -> Result<Vec<f64>, NnError> {
    let encoding = InputEncoding::for_model(model.config())?;
    let mut out = Vec::with_capacity(samples.len());
    let refs: Vec<&Sample> = samples.iter().collect();
    for chunk in refs.chunks(EVAL_BATCH) {
        let y = model.forward_mode(batch_tensor(chunk, encoding)?, Mode::Eval)?;
        out.extend(y.data().iter().map(|v| Real::to_f64(*v)));
    }
    Ok(out)
}

fn eval_mse<T: Real>(model: &mut Model<T>, samples: &[Sample]) -> Result<f64, NnError> {
    let pred = predict(model, samples)?;
    Ok(pred.iter().zip(samples).map(|(p, s)| (p - s.label).powi(2)).sum::<f64>() / samples.len() as f64)
}

/// Mini-batch training on `split.train` with per-epoch validation on
/// `split.val`, then predictions on `split.test`. The input encoding follows
/// from the model's input shape.
pub fn train<T: Real>(model: &mut Model<T>, split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainReport, NnError> {
    cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(NnError::InvalidTrainConfig("train and validation splits must be non-empty".into()));
    }
    if let Some(s) = split.train.iter().find(|s| !(s.label.is_finite() && s.label > 0.0)) {
        return Err(NnError::InvalidTrainConfig(format!("sample {} has label {}", s.id, s.label)));
    }
    let encoding = InputEncoding::for_model(model.config())?;
    let start = Instant::now();

    if cfg.standardize_targets {
        let n = split.train.len() as f64;
        let mean = split.train.iter().map(|s| s.label).sum::<f64>() / n;
        let var = split.train.iter().map(|s| (s.label - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        model.set_output_affine(mean, std);
    }
    if cfg.zero_init_head {
        model.zero_output_layer();
    }
    model.set_dropout_seed(cfg.seed ^ 0x5EED_D809);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut order: Vec<&Sample> = split.train.iter().collect();

    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, State<T>)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let x = batch_tensor(chunk, encoding)?;
            let pred = model.forward_mode(x, Mode::Train)?;
            let (loss, grad) = mse_loss(&pred, &label_tensor(chunk))?;
            if !loss.is_finite() {
                return Err(NnError::DivergedTraining { epoch, loss });
            }
            model.zero_grad();
            model.backward(grad)?;
            optimizer.step(model.params_mut());
            total += loss;
            batches += 1;
        }
        let epoch_loss = total / batches as f64;
        let val = eval_mse(model, &split.val)?;
        if !val.is_finite() {
            return Err(NnError::DivergedTraining { epoch, loss: val });
        }
        if cfg.restore_best && best.as_ref().is_none_or(|(b, _, _)| val < *b) {
            best = Some((val, epoch, model.state()));
        }
        train_loss.push(epoch_loss);
        val_loss.push(val);
    }
    let mut final_epoch = cfg.epochs - 1;
    if let Some((_, epoch, (params, buffers))) = best {
        model.load_state(&params, &buffers)?;
        final_epoch = epoch;
    }
    let predictions = predict(model, &split.test)?;
    Ok(TrainReport {
        train_loss,
        val_loss,
        test_predictions: predictions.into_iter().zip(split.test.iter().map(|s| s.label)).collect(),
        test_ids: split.test.iter().map(|s| s.id).collect(),
        final_epoch,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hrrp_sim::{AspectAngle, HrrpSequence};
    use crate::nn::{build_cnn1d, LayerSpec};

    pub(crate) fn toy_split(n: usize, len: usize) -> DatasetSplit {
        let samples: Vec<Sample> = (0..n)
            .map(|id| {
                let width = 2 + id % 5;
                let bins = (0..len)
                    .map(|i| if i.abs_diff(len / 2) <= width { 1.0 } else { 0.05 + 0.01 * ((i * 7 + id) % 3) as f64 })
                    .collect();
                Sample {
                    id,
                    geometry: 0,
                    aspect: AspectAngle::new(90.0, 0.0),
                    label: 1.0 + width as f64,
                    hrrp: HrrpSequence {
                        bins,
                        range_resolution: 0.05,
                        snr_db: None,
                        label_d: None,
                    },
                }
            })
            .collect();
        DatasetSplit::partition(samples, 3)
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let split = toy_split(20, 16);
        let mut model = Model::<f64>::new(build_cnn1d(16).unwrap()).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 4,
            batch_size: 64,
            restore_best: false,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &split, &cfg).unwrap();
        assert_eq!(report.train_loss.len(), 4);
        for l in &report.train_loss {
            assert!((l - report.train_loss[0]).abs() < 1e-12);
        }
        // mini-batches without batch statistics: same loss up to summation order
        let mut linear = Model::<f64>::new(ModelConfig {
            layers: vec![LayerSpec::Dense { inputs: 16, outputs: 1 }],
            input_shape: vec![1, 16],
            init_seed: 1,
        })
        .unwrap();
        let cfg = TrainConfig { batch_size: 4, ..cfg };
        let report = train(&mut linear, &split, &cfg).unwrap();
        for l in &report.train_loss {
            assert!((l - report.train_loss[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let split = toy_split(30, 16);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = Model::<f32>::new(build_cnn1d(16).unwrap()).unwrap();
            let mut r = train(&mut m, &split, &cfg).unwrap();
            r.wall_seconds = 0.0;
            (r, m.state())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zeroed_head_starts_at_label_mean() {
        let split = toy_split(30, 16);
        let mean = split.train.iter().map(|s| s.label).sum::<f64>() / split.train.len() as f64;
        let mut m = Model::<f64>::new(build_cnn1d(16).unwrap()).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 1, ..TrainConfig::default() };
        let report = train(&mut m, &split, &cfg).unwrap();
        for (pred, _) in &report.test_predictions {
            assert!((pred - mean).abs() < 1e-9, "{pred} vs {mean}");
        }
        let n = m.params().len();
        assert!(m.params()[n - 2].data().iter().all(|w| *w == 0.0));
        assert!(m.params()[0].data().iter().any(|w| *w != 0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let split = toy_split(10, 16);
        let mut m = Model::<f32>::new(build_cnn1d(16).unwrap()).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(train(&mut m, &split, &cfg), Err(NnError::InvalidTrainConfig(_))));
        let cfg = TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() };
        assert!(train(&mut m, &split, &cfg).is_err());
    }

    #[test]
    fn diverging_run_reports_error() {
        let split = toy_split(20, 16);
        let mut m = Model::<f32>::new(build_cnn1d(16).unwrap()).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e30,
            optimizer: OptimizerKind::Sgd,
            epochs: 20,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&mut m, &split, &cfg), Err(NnError::DivergedTraining { .. })));
    }
}
