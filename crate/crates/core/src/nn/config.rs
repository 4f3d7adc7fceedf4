use serde::{Deserialize, Serialize};

use super::NnError;

fn yes() -> bool {
    true
}

/// One layer of a model description. Shapes exclude the batch axis:
/// 1D layers see `[channels, length]`, 2D layers `[channels, height, width]`.
/// Convolutions use "same" padding `(kernel - 1) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    BatchNorm {
        features: usize,
    },
    Relu,
    MaxPool1d {
        size: usize,
    },
    MaxPool2d {
        size: usize,
    },
    /// Flattens its input; `inputs` must equal the flattened length.
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Dropout {
        rate: f64,
    },
    /// Mean over all spatial positions, `[C, ...] -> [C]`.
    GlobalAvgPool,
    /// `relu(inner(x) + skip(x))`. With `projection` the skip path is a 1x1
    /// convolution (stride = product of inner conv strides, no bias) followed
    /// by batch norm; without it the skip is the identity.
    ResidualBlock {
        inner: Vec<LayerSpec>,
        projection: bool,
    },
}

pub(crate) fn conv_out(len: usize, kernel: usize, stride: usize) -> usize {
    let pad = (kernel - 1) / 2;
    (len + 2 * pad - kernel) / stride + 1
}

impl LayerSpec {
    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = |expected: Vec<usize>| NnError::ShapeMismatch {
            layer: None,
            expected,
            got: input.to_vec(),
        };
        match self {
            LayerSpec::Conv1d { filters, kernel, stride, .. } => {
                positive(&[*filters, *kernel, *stride])?;
                odd(*kernel)?;
                if input.len() != 2 || input[1] < *kernel / 2 + 1 {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), *kernel]));
                }
                Ok(vec![*filters, conv_out(input[1], *kernel, *stride)])
            }
            LayerSpec::Conv2d { filters, kernel, stride, .. } => {
                positive(&[*filters, *kernel, *stride])?;
                odd(*kernel)?;
                if input.len() != 3 || input[1].min(input[2]) < *kernel / 2 + 1 {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), *kernel, *kernel]));
                }
                Ok(vec![
                    *filters,
                    conv_out(input[1], *kernel, *stride),
                    conv_out(input[2], *kernel, *stride),
                ])
            }
            LayerSpec::BatchNorm { features } => {
                positive(&[*features])?;
                if input.first() != Some(features) {
                    return Err(mismatch(vec![*features]));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(NnError::config(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::MaxPool1d { size } => {
                positive(&[*size])?;
                if input.len() != 2 || input[1] < *size {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), *size]));
                }
                Ok(vec![input[0], input[1] / size])
            }
            LayerSpec::MaxPool2d { size } => {
                positive(&[*size])?;
                if input.len() != 3 || input[1].min(input[2]) < *size {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), *size, *size]));
                }
                Ok(vec![input[0], input[1] / size, input[2] / size])
            }
            LayerSpec::Dense { inputs, outputs } => {
                positive(&[*inputs, *outputs])?;
                if input.iter().product::<usize>() != *inputs {
                    return Err(mismatch(vec![*inputs]));
                }
                Ok(vec![*outputs])
            }
            LayerSpec::GlobalAvgPool => {
                if input.len() < 2 {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), 1]));
                }
                Ok(vec![input[0]])
            }
            LayerSpec::ResidualBlock { inner, projection } => {
                if inner.is_empty() {
                    return Err(NnError::config("residual block has no inner layers"));
                }
                let mut shape = input.to_vec();
                for spec in inner {
                    shape = spec.output_shape(&shape)?;
                }
                let skip = match projection {
                    true => self.projection_specs(input)?.iter().try_fold(input.to_vec(), |s, l| l.output_shape(&s))?,
                    false => input.to_vec(),
                };
                if skip != shape {
                    return Err(NnError::ShapeMismatch {
                        layer: None,
                        expected: shape,
                        got: skip,
                    });
                }
                Ok(shape)
            }
        }
    }

    /// Skip-path layers of a projecting residual block.
    pub(crate) fn projection_specs(&self, input: &[usize]) -> Result<Vec<LayerSpec>, NnError> {
        let LayerSpec::ResidualBlock { inner, .. } = self else {
            return Ok(vec![]);
        };
        let mut shape = input.to_vec();
        let mut stride = 1;
        for spec in inner {
            match spec {
                LayerSpec::Conv1d { stride: s, .. } | LayerSpec::Conv2d { stride: s, .. } => stride *= s,
                _ => {}
            }
            shape = spec.output_shape(&shape)?;
        }
        let filters = shape[0];
        let conv = match input.len() {
            2 => LayerSpec::Conv1d { filters, kernel: 1, stride, bias: false },
            3 => LayerSpec::Conv2d { filters, kernel: 1, stride, bias: false },
            _ => return Err(NnError::config("projection needs a 1D or 2D feature map")),
        };
        Ok(vec![conv, LayerSpec::BatchNorm { features: filters }])
    }

    /// Trainable parameter count for a given input shape.
    pub fn param_count(&self, input: &[usize]) -> Result<usize, NnError> {
        Ok(match self {
            LayerSpec::Conv1d { filters, kernel, bias, .. } => {
                filters * input[0] * kernel + if *bias { *filters } else { 0 }
            }
            LayerSpec::Conv2d { filters, kernel, bias, .. } => {
                filters * input[0] * kernel * kernel + if *bias { *filters } else { 0 }
            }
            LayerSpec::BatchNorm { features } => 2 * features,
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::ResidualBlock { inner, projection } => {
                let mut shape = input.to_vec();
                let mut total = 0;
                for spec in inner {
                    total += spec.param_count(&shape)?;
                    shape = spec.output_shape(&shape)?;
                }
                if *projection {
                    let mut shape = input.to_vec();
                    for spec in self.projection_specs(input)? {
                        total += spec.param_count(&shape)?;
                        shape = spec.output_shape(&shape)?;
                    }
                }
                total
            }
            _ => 0,
        })
    }
}

fn positive(values: &[usize]) -> Result<(), NnError> {
    if values.contains(&0) {
        return Err(NnError::config(format!("layer sizes must be positive, got {values:?}")));
    }
    Ok(())
}

fn odd(kernel: usize) -> Result<(), NnError> {
    if kernel.is_multiple_of(2) {
        return Err(NnError::config(format!("kernel {kernel} must be odd for same padding")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
    /// Per-sample input shape, batch axis excluded.
    pub input_shape: Vec<usize>,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Shape after every layer, starting with the input shape.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(NnError::config(format!("invalid input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, spec) in self.layers.iter().enumerate() {
            let next = spec.output_shape(shapes.last().expect("non-empty")).map_err(|e| e.at_layer(i))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NnError> {
        Ok(self.shapes()?.pop().expect("non-empty"))
    }

    /// Checks layer compatibility and that the model emits one scalar.
    pub fn validate(&self) -> Result<(), NnError> {
        let out = self.output_shape()?;
        if out != [1] {
            return Err(NnError::config(format!("model must emit a single scalar, emits {out:?}")));
        }
        Ok(())
    }

    pub fn param_count(&self) -> Result<usize, NnError> {
        let shapes = self.shapes()?;
        self.layers
            .iter()
            .zip(&shapes)
            .map(|(spec, shape)| spec.param_count(shape))
            .sum()
    }
}
