use super::{LayerSpec, ModelConfig, NnError};

/// 1D CNN regressor for `1 x profile_len` inputs: three conv/BN/ReLU blocks
/// with 32, 64 and 128 filters (kernel 3), max pooling by 2, then
/// `Dense(flatten -> 64)`, ReLU, `Dense(64 -> 1)`.
pub fn build_cnn1d(profile_len: usize) -> Result<ModelConfig, NnError> {
    if profile_len < 8 {
        return Err(NnError::config(format!("cnn1d needs profile_len >= 8, got {profile_len}")));
    }
    let mut layers = Vec::new();
    for filters in [32, 64, 128] {
        layers.push(LayerSpec::Conv1d { filters, kernel: 3, stride: 1, bias: false });
        layers.push(LayerSpec::BatchNorm { features: filters });
        layers.push(LayerSpec::Relu);
    }
    layers.extend([
        LayerSpec::MaxPool1d { size: 2 },
        LayerSpec::Dense { inputs: 128 * (profile_len / 2), outputs: 64 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 64, outputs: 1 },
    ]);
    Ok(ModelConfig {
        layers,
        input_shape: vec![1, profile_len],
        init_seed: 0,
    })
}

fn residual(in_ch: usize, out_ch: usize) -> LayerSpec {
    let stride = if in_ch == out_ch { 1 } else { 2 };
    LayerSpec::ResidualBlock {
        inner: vec![
            LayerSpec::Conv2d { filters: out_ch, kernel: 3, stride, bias: false },
            LayerSpec::BatchNorm { features: out_ch },
            LayerSpec::Relu,
            LayerSpec::Conv2d { filters: out_ch, kernel: 3, stride: 1, bias: false },
            LayerSpec::BatchNorm { features: out_ch },
        ],
        projection: in_ch != out_ch,
    }
}

/// Small residual regressor over single-channel `side x side` GAF images:
/// conv stem (16 filters) with BN, ReLU and 2x2 max pooling, residual blocks
/// 16->16, 16->32 and 32->64 (the widening blocks halve the resolution and
/// project the skip path), global average pooling, dropout 0.1 and
/// `Dense(64 -> 1)`.
pub fn build_gaf_resnet_toy(image_side: usize) -> Result<ModelConfig, NnError> {
    if image_side < 8 {
        return Err(NnError::config(format!("toy resnet needs image_side >= 8, got {image_side}")));
    }
    let layers = vec![
        LayerSpec::Conv2d { filters: 16, kernel: 3, stride: 1, bias: false },
        LayerSpec::BatchNorm { features: 16 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { size: 2 },
        residual(16, 16),
        residual(16, 32),
        residual(32, 64),
        LayerSpec::GlobalAvgPool,
        LayerSpec::Dropout { rate: 0.1 },
        LayerSpec::Dense { inputs: 64, outputs: 1 },
    ];
    Ok(ModelConfig {
        layers,
        input_shape: vec![1, image_side, image_side],
        init_seed: 0,
    })
}
