//! Central finite-difference verification of analytic gradients.
//!
//! Checks run in `f64`. The reported error for each input element is
//! `|analytic - numeric| / max(1, |analytic|)`; a check returns the maximum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BatchNormState, GradTape, Mode, Shape, Tensor, Var};
use crate::error::{Error, Result};
use crate::network::Network;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Attempts at drawing inputs away from kinks before giving up.
pub const MAX_RESAMPLES: usize = 20;

/// Minimum distance from a relu kink or max-pool tie for a sample to count
/// as differentiable.
const KINK_MARGIN: f64 = 1e-3;

/// Largest difference between one-sided slopes still taken as smooth in
/// the network check.
const SLOPE_JUMP: f64 = 1e-5;

/// Compares tape gradients of the scalar built by `build` against central
/// differences, perturbing every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], h: f64, build: F) -> Result<f64>
where
    F: Fn(&mut GradTape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = GradTape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };
    let mut tape = GradTape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let hi = eval(&work)?;
            work[i].data_mut()[j] = orig - h;
            let lo = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (hi - lo) / (2.0 * h);
            let a = analytic.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// A differentiable primitive exercised by [`check_primitive`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Primitive {
    Conv2d { kernel: usize },
    TransposedConv2d { kernel: usize },
    MaxPool,
    Upsample,
    BatchNorm(Mode),
    Relu,
    Sigmoid,
    Dropout,
    JaccardLoss,
}

impl Primitive {
    /// Every primitive, with both kernel parities for the convolutions.
    pub fn all() -> Vec<Primitive> {
        vec![
            Primitive::Conv2d { kernel: 3 },
            Primitive::Conv2d { kernel: 4 },
            Primitive::TransposedConv2d { kernel: 3 },
            Primitive::TransposedConv2d { kernel: 4 },
            Primitive::MaxPool,
            Primitive::Upsample,
            Primitive::BatchNorm(Mode::Train),
            Primitive::BatchNorm(Mode::Infer),
            Primitive::Relu,
            Primitive::Sigmoid,
            Primitive::Dropout,
            Primitive::JaccardLoss,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Primitive::Conv2d { kernel } => format!("conv2d-{kernel}x{kernel}"),
            Primitive::TransposedConv2d { kernel } => format!("transposed_conv2d-{kernel}x{kernel}"),
            Primitive::MaxPool => "maxpool2x2".into(),
            Primitive::Upsample => "upsample2x2".into(),
            Primitive::BatchNorm(Mode::Train) => "batchnorm-train".into(),
            Primitive::BatchNorm(Mode::Infer) => "batchnorm-infer".into(),
            Primitive::Relu => "relu".into(),
            Primitive::Sigmoid => "sigmoid".into(),
            Primitive::Dropout => "dropout".into(),
            Primitive::JaccardLoss => "jaccard_loss".into(),
        }
    }
}

fn uniform(shape: impl Into<Shape>, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.gen_range(lo..hi))
}

fn near_relu_kink(x: &Tensor<f64>) -> bool {
    x.data().iter().any(|v| v.abs() < KINK_MARGIN)
}

fn near_pool_tie(x: &Tensor<f64>) -> bool {
    let s = x.shape();
    (0..s.n * s.c).any(|p| {
        let plane = &x.data()[p * s.plane()..(p + 1) * s.plane()];
        (0..s.h / 2).any(|y| {
            (0..s.w / 2).any(|xx| {
                let top = 2 * y * s.w + 2 * xx;
                let mut v = [plane[top], plane[top + 1], plane[top + s.w], plane[top + s.w + 1]];
                v.sort_by(|a, b| b.total_cmp(a));
                v[0] - v[1] < KINK_MARGIN
            })
        })
    })
}

/// Gradient check of one primitive on random inputs of shape `shape`,
/// resampling inputs that land too close to a non-differentiable point.
pub fn check_primitive(prim: Primitive, shape: Shape, seed: u64, h: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_ch = shape.c + 1;
    for _ in 0..MAX_RESAMPLES {
        let x = uniform(shape, -1.0, 1.0, &mut rng);
        let weights_for = |s: Shape, rng: &mut ChaCha8Rng| uniform(s, -1.0, 1.0, rng);
        let result = match prim {
            Primitive::Conv2d { kernel } => {
                let w = uniform([out_ch, shape.c, kernel, kernel], -1.0, 1.0, &mut rng);
                let b = uniform([1, out_ch, 1, 1], -1.0, 1.0, &mut rng);
                let r = weights_for(Shape::new(shape.n, out_ch, shape.h, shape.w), &mut rng);
                check_gradients(&[x, w, b], h, |t, v| {
                    let y = t.conv2d(v[0], v[1], v[2])?;
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::TransposedConv2d { kernel } => {
                let w = uniform([shape.c, out_ch, kernel, kernel], -1.0, 1.0, &mut rng);
                let b = uniform([1, out_ch, 1, 1], -1.0, 1.0, &mut rng);
                let r = weights_for(Shape::new(shape.n, out_ch, shape.h, shape.w), &mut rng);
                check_gradients(&[x, w, b], h, |t, v| {
                    let y = t.transposed_conv2d(v[0], v[1], v[2])?;
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::MaxPool => {
                if near_pool_tie(&x) {
                    continue;
                }
                let r = weights_for(Shape::new(shape.n, shape.c, shape.h / 2, shape.w / 2), &mut rng);
                check_gradients(&[x], h, |t, v| {
                    let y = t.maxpool2x2(v[0])?;
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::Upsample => {
                let r = weights_for(Shape::new(shape.n, shape.c, shape.h * 2, shape.w * 2), &mut rng);
                check_gradients(&[x], h, |t, v| {
                    let y = t.upsample2x2(v[0]);
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::BatchNorm(mode) => {
                let gamma = uniform([1, shape.c, 1, 1], 0.5, 1.5, &mut rng);
                let beta = uniform([1, shape.c, 1, 1], -0.5, 0.5, &mut rng);
                let mut state = BatchNormState::<f64>::new(shape.c);
                state.running_mean = (0..shape.c).map(|_| rng.gen_range(-0.5..0.5)).collect();
                state.running_var = (0..shape.c).map(|_| rng.gen_range(0.5..2.0)).collect();
                let r = weights_for(shape, &mut rng);
                check_gradients(&[x, gamma, beta], h, |t, v| {
                    let mut st = state.clone();
                    let y = t.batchnorm(v[0], v[1], v[2], &mut st, mode)?;
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::Relu => {
                if near_relu_kink(&x) {
                    continue;
                }
                let r = weights_for(shape, &mut rng);
                check_gradients(&[x], h, |t, v| {
                    let y = t.relu(v[0]);
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::Sigmoid => {
                let x = x.map(|v| 4.0 * v);
                let r = weights_for(shape, &mut rng);
                check_gradients(&[x], h, |t, v| {
                    let y = t.sigmoid(v[0]);
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::Dropout => {
                let r = weights_for(shape, &mut rng);
                let mask_seed = rng.gen::<u64>();
                check_gradients(&[x], h, |t, v| {
                    let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed);
                    let y = t.dropout(v[0], 0.5, Mode::Train, &mut mask_rng);
                    t.weighted_sum(y, r.clone())
                })
            }
            Primitive::JaccardLoss => {
                let p = uniform(shape, 0.02, 0.98, &mut rng);
                let target = Tensor::from_fn(shape, |_, _, _, _| if rng.gen_bool(0.4) { 1.0 } else { 0.0 });
                check_gradients(&[p], h, |t, v| t.jaccard_loss(v[0], target.clone(), 1.0))
            }
        };
        return result;
    }
    Err(Error::GradCheck(format!(
        "{}: no differentiable sample found in {MAX_RESAMPLES} draws",
        prim.name()
    )))
}

/// Gradient check of the Jaccard loss of the whole network (train mode)
/// with respect to `samples` randomly chosen parameter elements. Elements
/// whose perturbation crosses a relu kink or max-pool tie are redrawn.
pub fn check_network_subset(seed: u64, samples: usize, input: Shape, h: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net: Network<f64> = Network::build(input.c, &mut rng)?;
    let x = uniform(input, 0.0, 1.0, &mut rng);
    let target = Tensor::from_fn(Shape::new(input.n, 1, input.h, input.w), |_, _, y, xx| {
        let (cy, cx) = (input.h as f64 / 2.0, input.w as f64 / 2.0);
        let d = ((y as f64 - cy) / cy).powi(2) + ((xx as f64 - cx) / cx).powi(2);
        if d < 0.4 {
            1.0
        } else {
            0.0
        }
    });
    let dropout_seed = rng.gen::<u64>();

    let eval = |net: &mut Network<f64>, with_grads: bool| -> Result<(f64, Vec<Tensor<f64>>)> {
        let mut tape = GradTape::new();
        let xv = tape.leaf(x.clone());
        let mut drop_rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let (y, params) = net.forward_tape(&mut tape, xv, Mode::Train, &mut drop_rng)?;
        let loss = tape.jaccard_loss(y, target.clone(), 1.0)?;
        let value = tape.value(loss).data()[0];
        if !with_grads {
            return Ok((value, Vec::new()));
        }
        let g = tape.backward(loss)?;
        let grads = params
            .iter()
            .map(|p| {
                g.get(*p)
                    .cloned()
                    .ok_or_else(|| Error::GradCheck("parameter without gradient".into()))
            })
            .collect::<Result<_>>()?;
        Ok((value, grads))
    };
    let (_, grads) = eval(&mut net, true)?;
    let sizes: Vec<usize> = net.parameters().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();

    let mut worst = 0.0f64;
    let mut accepted = 0;
    let mut draws = 0;
    let f0 = eval(&mut net, false)?.0;
    while accepted < samples {
        draws += 1;
        if draws > samples * MAX_RESAMPLES {
            return Err(Error::GradCheck(format!(
                "only {accepted} of {samples} samples avoided a kink"
            )));
        }
        let mut flat = rng.gen_range(0..total);
        let mut tensor = 0;
        while flat >= sizes[tensor] {
            flat -= sizes[tensor];
            tensor += 1;
        }
        let orig = net.parameters()[tensor].data()[flat];
        net.parameters_mut()[tensor].data_mut()[flat] = orig + h;
        let hi = eval(&mut net, false)?.0;
        net.parameters_mut()[tensor].data_mut()[flat] = orig - h;
        let lo = eval(&mut net, false)?.0;
        net.parameters_mut()[tensor].data_mut()[flat] = orig;
        let a = grads[tensor].data()[flat];
        // A relu or max-pool switch inside [orig - h, orig + h] shows up as
        // a jump between the one-sided slopes.
        if ((hi - f0) / h - (f0 - lo) / h).abs() > SLOPE_JUMP * a.abs().max(1.0) {
            continue;
        }
        accepted += 1;
        let numeric = (hi - lo) / (2.0 * h);
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_and_sigmoid_meet_double_precision_bounds() {
        let conv = check_primitive(Primitive::Conv2d { kernel: 3 }, Shape::new(2, 3, 6, 6), 1, DEFAULT_STEP).unwrap();
        assert!(conv < 1e-6, "{conv}");
        let sig = check_primitive(Primitive::Sigmoid, Shape::new(2, 3, 5, 4), 2, DEFAULT_STEP).unwrap();
        assert!(sig < 1e-8, "{sig}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // Claiming d(relu(x))/dx through a scaled weighted sum must be caught
        // when the analytic path disagrees with the function being probed.
        let x = Tensor::<f64>::from_vec([1, 1, 1, 2], vec![0.5, -0.7]).unwrap();
        let err = check_gradients(&[x], DEFAULT_STEP, |t, v| {
            let y = t.relu(v[0]);
            let scale = if t.value(v[0]).data()[0] == 0.5 { 1.0 } else { 3.0 };
            t.weighted_sum(y, Tensor::full([1, 1, 1, 2], scale))
        })
        .unwrap();
        assert!(err > 0.5);
    }
}
