use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, NnError, Real};

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON container for a trained model. Values are stored as `f64`, which
/// represents `f32` weights exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Element type the model was trained in.
    pub dtype: String,
    pub config: ModelConfig,
    pub output_shift: f64,
    pub output_scale: f64,
    /// Parameter tensors in declaration order.
    pub params: Vec<Vec<f64>>,
    /// Batch-norm running means and variances in declaration order.
    pub buffers: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_model<T: Real>(model: &Model<T>) -> Self {
        let widen = |v: Vec<Vec<T>>| v.into_iter().map(|t| t.into_iter().map(Real::to_f64).collect()).collect();
        let (params, buffers) = model.state();
        let (output_shift, output_scale) = model.output_affine();
        Self {
            format_version: CHECKPOINT_VERSION,
            dtype: T::NAME.to_string(),
            config: model.config().clone(),
            output_shift,
            output_scale,
            params: widen(params),
            buffers: widen(buffers),
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<Model<T>, NnError> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(NnError::config(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        let narrow = |v: &[Vec<f64>]| -> Vec<Vec<T>> {
            v.iter().map(|t| t.iter().map(|&x| T::from_f64(x)).collect()).collect()
        };
        let mut model = Model::new(self.config.clone())?;
        model.load_state(&narrow(&self.params), &narrow(&self.buffers))?;
        model.set_output_affine(self.output_shift, self.output_scale);
        Ok(model)
    }
}

fn ckpt_err(path: &Path, e: impl ToString) -> NnError {
    NnError::Checkpoint {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, path: &Path) -> Result<(), NnError> {
    let json = serde_json::to_vec(&Checkpoint::from_model(model)).map_err(|e| ckpt_err(path, e))?;
    fs::write(path, json).map_err(|e| ckpt_err(path, e))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Model<T>, NnError> {
    let bytes = fs::read(path).map_err(|e| ckpt_err(path, e))?;
    let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| ckpt_err(path, e))?;
    ckpt.to_model()
}
