//! Jaccard-distance loss, Adam, augmentation, bootstrap resampling and the
//! training loop.

pub mod adam;
pub mod augment;
pub mod bootstrap;
pub mod config;
pub mod loss;
pub mod trainer;

pub use adam::{AdamConfig, AdamState};
pub use augment::{apply_contrast, augment_contrast, augment_geometric, AugmentConfig, GeometricTransform};
pub use bootstrap::{bootstrap_indices, bootstrap_sample};
pub use config::TrainConfig;
pub use loss::{jaccard_loss, jaccard_loss_grad, DEFAULT_SMOOTHING};
pub use trainer::{
    history_csv, member_seed, train, train_ensemble, train_network, train_with, EpochStats, TrainOutcome, TrainSample,
};
