//! The fixed 26-row layer table of the convolutional-deconvolutional network.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    Pool,
    Deconv,
    Upsample,
    Output,
}

impl LayerKind {
    pub fn has_params(self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Deconv | LayerKind::Output)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::Deconv => "deconv",
            LayerKind::Upsample => "upsample",
            LayerKind::Output => "output",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: &'static str,
    pub kind: LayerKind,
    pub filter: (usize, usize),
    pub out_features: usize,
    pub has_batchnorm: bool,
    pub activation: Activation,
    pub dropout_before: Option<f64>,
}

impl LayerSpec {
    const fn conv(name: &'static str, k: usize, out_features: usize) -> Self {
        LayerSpec {
            name,
            kind: LayerKind::Conv,
            filter: (k, k),
            out_features,
            has_batchnorm: true,
            activation: Activation::Relu,
            dropout_before: None,
        }
    }

    const fn deconv(name: &'static str, k: usize, out_features: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Deconv,
            ..Self::conv(name, k, out_features)
        }
    }

    const fn resample(name: &'static str, kind: LayerKind, out_features: usize) -> Self {
        LayerSpec {
            name,
            kind,
            filter: (2, 2),
            out_features,
            has_batchnorm: false,
            activation: Activation::None,
            dropout_before: None,
        }
    }

    const fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_before = Some(p);
        self
    }
}

/// Dropout rate applied to the inputs of conv-4-1 and decv-5-1.
pub const DROPOUT_P: f64 = 0.5;

/// Total spatial down-sampling factor of the encoder (four 2x2 pools).
pub const SPATIAL_DIVISOR: usize = 16;

/// The layer table in forward order: encoder rows, then decoder rows.
pub fn cdnn_layers() -> Vec<LayerSpec> {
    use LayerKind::{Pool, Upsample};
    vec![
        LayerSpec::conv("conv-1-1", 3, 16),
        LayerSpec::conv("conv-1-2", 3, 32),
        LayerSpec::resample("pool-1", Pool, 32),
        LayerSpec::conv("conv-2-1", 3, 64),
        LayerSpec::conv("conv-2-2", 3, 64),
        LayerSpec::resample("pool-2", Pool, 64),
        LayerSpec::conv("conv-3-1", 3, 128),
        LayerSpec::conv("conv-3-2", 4, 128),
        LayerSpec::resample("pool-3", Pool, 128),
        LayerSpec::conv("conv-4-1", 3, 256).with_dropout(DROPOUT_P),
        LayerSpec::conv("conv-4-2", 3, 256),
        LayerSpec::resample("pool-4", Pool, 256),
        LayerSpec::conv("conv-5", 3, 512),
        LayerSpec::deconv("decv-1", 3, 256),
        LayerSpec::resample("ups-1", Upsample, 256),
        LayerSpec::deconv("decv-2-1", 3, 256),
        LayerSpec::deconv("decv-2-2", 3, 128),
        LayerSpec::resample("ups-2", Upsample, 128),
        LayerSpec::deconv("decv-3-1", 4, 128),
        LayerSpec::deconv("decv-3-2", 3, 128),
        LayerSpec::resample("ups-3", Upsample, 128),
        LayerSpec::deconv("decv-4-1", 3, 64),
        LayerSpec::deconv("decv-4-2", 3, 32),
        LayerSpec::resample("ups-4", Upsample, 32),
        LayerSpec::deconv("decv-5-1", 3, 16).with_dropout(DROPOUT_P),
        LayerSpec {
            name: "output",
            kind: LayerKind::Output,
            filter: (3, 3),
            out_features: 1,
            has_batchnorm: false,
            activation: Activation::Sigmoid,
            dropout_before: None,
        },
    ]
}
