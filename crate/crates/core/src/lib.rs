//! Skin lesion segmentation with a fully convolutional-deconvolutional
//! network.
//!
//! - [`tensor`]: rank-4 tensors, layer primitives and reverse-mode gradients
//! - [`network`]: the 26-row encoder/decoder and its weight file format
//! - [`training`]: Jaccard-distance loss, Adam, augmentation and bagging
//! - [`imageproc`]: seven-plane colour preprocessing and resizing
//! - [`postprocess`]: dual-threshold mask extraction and ensembling
//! - [`pipeline`]: datasets, metrics, synthetic data and the CLI

pub mod error;
mod fsutil;
pub mod imageproc;
pub mod network;
pub mod pipeline;
pub mod postprocess;
pub mod tensor;
pub mod training;

pub use error::{Error, Result, WeightFileError};
pub use network::Network;
pub use tensor::{GradTape, Mode, Shape, Tensor};
