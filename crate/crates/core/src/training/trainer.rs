//! Mini-batch training loop and bagged ensembles.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::augment::{augment_contrast, GeometricTransform};
use super::bootstrap::bootstrap_indices;
use super::config::TrainConfig;
use super::loss::DEFAULT_SMOOTHING;
use crate::error::{Error, Result};
use crate::imageproc::FloatImage;
use crate::network::Network;
use crate::postprocess::BinaryMask;
use crate::tensor::{GradTape, Mode, Tensor};

/// A preprocessed image with its ground-truth mask.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample {
    pub image: FloatImage,
    pub mask: BinaryMask,
}

impl TrainSample {
    pub fn new(image: FloatImage, mask: BinaryMask) -> Result<Self> {
        if (image.height(), image.width()) != (mask.height(), mask.width()) {
            return Err(Error::InvalidArgument(format!(
                "image is {}x{} but mask is {}x{}",
                image.height(),
                image.width(),
                mask.height(),
                mask.width()
            )));
        }
        Ok(TrainSample { image, mask })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Per-image Jaccard index of the thresholded training predictions
    /// against their augmented masks, averaged over the epoch.
    pub mean_train_jaccard: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub history: Vec<EpochStats>,
}

// Independent ChaCha streams derived from one seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_AUGMENT: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_BOOTSTRAP: u64 = 4;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seed of ensemble member `k` (splitmix64 of the base seed and index).
pub fn member_seed(seed: u64, k: usize) -> u64 {
    let mut z = seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Comma-separated loss history with a header row.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_loss,mean_train_jaccard\n");
    for s in history {
        out.push_str(&format!("{},{:.6},{:.6}\n", s.epoch, s.mean_loss, s.mean_train_jaccard));
    }
    out
}

fn check_samples(samples: &[TrainSample]) -> Result<(usize, usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("training set is empty".into()))?;
    let dims = (first.image.channels(), first.image.height(), first.image.width());
    for (i, s) in samples.iter().enumerate() {
        if (s.image.channels(), s.image.height(), s.image.width()) != dims
            || (s.mask.height(), s.mask.width()) != (dims.1, dims.2)
        {
            return Err(Error::InvalidArgument(format!(
                "sample {i} does not match the extent of sample 0"
            )));
        }
    }
    Ok(dims)
}

/// Trains a freshly initialized network.
pub fn train(config: &TrainConfig, samples: &[TrainSample]) -> Result<TrainOutcome> {
    train_with(config, samples, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    config: &TrainConfig,
    samples: &[TrainSample],
    on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    let (channels, _, _) = check_samples(samples)?;
    let network = Network::build(channels, &mut stream(config.seed, STREAM_INIT))?;
    train_network(config, samples, network, on_epoch)
}

/// Continues training `network`; every random draw comes from streams of
/// `config.seed`, so equal inputs give bit-identical results.
pub fn train_network(
    config: &TrainConfig,
    samples: &[TrainSample],
    mut network: Network,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    let (channels, h, w) = check_samples(samples)?;
    if channels != network.input_channels() {
        return Err(Error::InvalidArgument(format!(
            "samples have {channels} planes, network expects {}",
            network.input_channels()
        )));
    }
    network.set_dropout(config.dropout_p);
    let adam_cfg = config.adam();
    let mut adam = AdamState::new(network.parameters());
    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut augment_rng = stream(config.seed, STREAM_AUGMENT);
    let mut dropout_rng = stream(config.seed, STREAM_DROPOUT);
    let smoothing = DEFAULT_SMOOTHING as f32;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut batches, mut jac_sum) = (0.0f64, 0usize, 0.0f64);
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let b = chunk.len();
            let mut x = Vec::with_capacity(b * channels * h * w);
            let mut t = Vec::with_capacity(b * h * w);
            for &i in chunk {
                let s = &samples[i];
                let tf = GeometricTransform::sample(&config.augment, h, w, &mut augment_rng);
                let img = augment_contrast(&tf.apply_image(&s.image), &mut augment_rng, &config.augment);
                x.extend_from_slice(img.data());
                t.extend(tf.apply_mask(&s.mask).to_f32());
            }
            let x = Tensor::from_vec([b, channels, h, w], x)?;
            let target = Tensor::from_vec([b, 1, h, w], t)?;

            let mut tape = GradTape::new();
            let input = tape.leaf(x);
            let (pred, handles) = network.forward_tape(&mut tape, input, Mode::Train, &mut dropout_rng)?;
            jac_sum += batch_jaccard(tape.value(pred).data(), target.data(), h * w);
            let loss_var = tape.jaccard_loss(pred, target, smoothing)?;
            let loss = f64::from(tape.value(loss_var).data()[0]);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    epoch,
                    norms: parameter_norms(&network),
                });
            }
            let mut grads = tape.backward(loss_var)?;
            let grads: Vec<Tensor> = handles
                .iter()
                .zip(network.parameters())
                .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
                .collect();
            drop(tape);
            adam.step(&mut network.parameters_mut(), &grads, &adam_cfg)?;
            loss_sum += loss;
            batches += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / batches as f64,
            mean_train_jaccard: jac_sum / samples.len() as f64,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { network, history })
}

/// Sum over images of the Jaccard index between `pred >= 0.5` and the target.
fn batch_jaccard(pred: &[f32], target: &[f32], plane: usize) -> f64 {
    pred.chunks(plane)
        .zip(target.chunks(plane))
        .map(|(p, t)| {
            let (mut inter, mut union) = (0usize, 0usize);
            for (&p, &t) in p.iter().zip(t) {
                let (a, b) = (p >= 0.5, t >= 0.5);
                inter += (a && b) as usize;
                union += (a || b) as usize;
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum()
}

fn parameter_norms(network: &Network) -> String {
    network
        .parameter_names()
        .iter()
        .zip(network.parameters())
        .map(|(n, p)| {
            format!(
                "{n}={:.4e}",
                p.data().iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt()
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Trains `config.ensemble_size` members, each on its own bootstrap
/// resample with its own seed. `on_epoch` receives the member index.
pub fn train_ensemble(
    config: &TrainConfig,
    samples: &[TrainSample],
    mut on_epoch: impl FnMut(usize, &EpochStats),
) -> Result<Vec<TrainOutcome>> {
    config.validate()?;
    check_samples(samples)?;
    (0..config.ensemble_size)
        .map(|k| {
            let seed = member_seed(config.seed, k);
            let idx = bootstrap_indices(samples.len(), &mut stream(seed, STREAM_BOOTSTRAP))?;
            let resample: Vec<TrainSample> = idx.into_iter().map(|i| samples[i].clone()).collect();
            train_with(&TrainConfig { seed, ..*config }, &resample, |s| on_epoch(k, s))
        })
        .collect()
}
