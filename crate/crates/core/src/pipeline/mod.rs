//! Datasets, metrics, run configuration, synthetic data, batch
//! prediction/evaluation and the command-line front end.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod predict;
pub mod synth;

pub use config::{RunConfig, DESK_EPOCHS};
pub use dataset::{resize_mask_nearest, Dataset, Record};
pub use metrics::{dice_from_jaccard, jaccard_index, Report, ReportRow};
pub use predict::{evaluate, mask_path, predict_files, predict_mask, predict_probability, PredictSummary};
pub use synth::{generate_synthetic, synthetic_sample, write_synthetic, SYNTH_HEIGHT, SYNTH_WIDTH};
