//! The convolutional-deconvolutional segmentation network.

mod layers;
mod model;
mod weights;

pub use layers::{cdnn_layers, Activation, LayerKind, LayerSpec, DROPOUT_P, SPATIAL_DIVISOR};
pub use model::{LayerParams, LayerTrace, Network, INPUT_CHANNELS};
pub use weights::{from_bytes, load_weights, save_weights, to_bytes, FORMAT_VERSION, MAGIC};
