use super::gemm::{lane_sum, lane_sum2};
use super::{Mode, Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Per-channel batch normalization parameters and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<S: Scalar = f32> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    /// Weight of the newest batch in the running averages.
    pub momentum: S,
    pub epsilon: S,
}

impl<S: Scalar> BatchNormState<S> {
    pub const DEFAULT_MOMENTUM: f64 = 0.1;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    /// Identity transform: gamma 1, beta 0, zero mean, unit variance.
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: Tensor::full([1, channels, 1, 1], S::one()),
            beta: Tensor::zeros([1, channels, 1, 1]),
            running_mean: vec![S::zero(); channels],
            running_var: vec![S::one(); channels],
            momentum: S::lit(Self::DEFAULT_MOMENTUM),
            epsilon: S::lit(Self::DEFAULT_EPSILON),
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    /// Forward pass using this state's own gamma and beta.
    pub fn forward(&mut self, x: &Tensor<S>, mode: Mode) -> Result<Tensor<S>> {
        let (gamma, beta) = (self.gamma.clone(), self.beta.clone());
        batchnorm_forward(x, &gamma, &beta, self, mode).map(|(y, _)| y)
    }

    pub fn cast<T: Scalar>(&self) -> BatchNormState<T> {
        let conv = |v: &[S]| v.iter().map(|&x| T::lit(x.as_f64())).collect();
        BatchNormState {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: conv(&self.running_mean),
            running_var: conv(&self.running_var),
            momentum: T::lit(self.momentum.as_f64()),
            epsilon: T::lit(self.epsilon.as_f64()),
        }
    }
}

/// Values saved by the forward pass for [`batchnorm_backward`].
#[derive(Clone, Debug)]
pub struct BatchNormCache<S: Scalar> {
    xhat: Tensor<S>,
    inv_std: Vec<S>,
    mode: Mode,
}

#[derive(Clone, Debug)]
pub struct BatchNormGrads<S: Scalar> {
    pub dx: Tensor<S>,
    pub dgamma: Tensor<S>,
    pub dbeta: Tensor<S>,
}

fn channel_view(s: Shape) -> impl Iterator<Item = (usize, usize)> {
    // (channel, start offset) of every plane
    (0..s.n * s.c).map(move |p| (p % s.c, p * s.plane()))
}

/// Normalizes `x` per channel, then scales by `gamma` and shifts by `beta`.
///
/// Train mode uses batch statistics over (batch, height, width) and folds
/// them into the running averages of `state`; infer mode uses the running
/// averages unchanged.
pub fn batchnorm_forward<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    state: &mut BatchNormState<S>,
    mode: Mode,
) -> Result<(Tensor<S>, BatchNormCache<S>)> {
    let s = x.shape();
    let channels = state.channels();
    if s.c != channels || gamma.len() != channels || beta.len() != channels {
        return Err(Error::shape(
            "batchnorm",
            format!(
                "input {s} against state for {channels} channels (gamma {}, beta {})",
                gamma.len(),
                beta.len()
            ),
        ));
    }
    let count = s.n * s.plane();
    let plane = s.plane();
    let data = x.data();
    let (mean, inv_std) = match mode {
        Mode::Train => {
            if count < 2 {
                return Err(Error::shape(
                    "batchnorm",
                    format!("train mode needs more than one value per channel, got {s}"),
                ));
            }
            let mut sum = vec![S::zero(); channels];
            for (c, off) in channel_view(s) {
                sum[c] += lane_sum(&data[off..off + plane], |v| v);
            }
            let n = S::lit(count as f64);
            let mean: Vec<S> = sum.iter().map(|&v| v / n).collect();
            let mut sq = vec![S::zero(); channels];
            for (c, off) in channel_view(s) {
                let m = mean[c];
                sq[c] += lane_sum(&data[off..off + plane], |v| (v - m) * (v - m));
            }
            let var: Vec<S> = sq.iter().map(|&v| v / n).collect();
            let keep = S::one() - state.momentum;
            let unbias = n / (n - S::one());
            for c in 0..channels {
                state.running_mean[c] = keep * state.running_mean[c] + state.momentum * mean[c];
                state.running_var[c] = keep * state.running_var[c] + state.momentum * var[c] * unbias;
            }
            let inv_std: Vec<S> = var.iter().map(|&v| (v + state.epsilon).sqrt().recip()).collect();
            (mean, inv_std)
        }
        Mode::Infer => (
            state.running_mean.clone(),
            state
                .running_var
                .iter()
                .map(|&v| (v + state.epsilon).sqrt().recip())
                .collect(),
        ),
    };
    let mut xhat = Tensor::zeros(s);
    let mut y = Tensor::zeros(s);
    {
        let (xh, out) = (xhat.data_mut(), y.data_mut());
        for (c, off) in channel_view(s) {
            let (m, is, g, b) = (mean[c], inv_std[c], gamma.data()[c], beta.data()[c]);
            let src = &data[off..off + plane];
            for ((xv, o), &v) in xh[off..off + plane].iter_mut().zip(&mut out[off..off + plane]).zip(src) {
                let v = (v - m) * is;
                *xv = v;
                *o = g * v + b;
            }
        }
    }
    Ok((y, BatchNormCache { xhat, inv_std, mode }))
}

pub fn batchnorm_backward<S: Scalar>(
    gamma: &Tensor<S>,
    cache: &BatchNormCache<S>,
    dy: &Tensor<S>,
) -> BatchNormGrads<S> {
    let s = dy.shape();
    let channels = s.c;
    let plane = s.plane();
    let (xhat, d) = (cache.xhat.data(), dy.data());
    let mut dgamma = vec![S::zero(); channels];
    let mut dbeta = vec![S::zero(); channels];
    for (c, off) in channel_view(s) {
        let (dp, xp) = (&d[off..off + plane], &xhat[off..off + plane]);
        dbeta[c] += lane_sum(dp, |v| v);
        dgamma[c] += lane_sum2(dp, xp, |g, x| g * x);
    }
    let mut dx = Tensor::zeros(s);
    let out = dx.data_mut();
    match cache.mode {
        Mode::Train => {
            let n = S::lit((s.n * plane) as f64);
            for (c, off) in channel_view(s) {
                let k = gamma.data()[c] * cache.inv_std[c] / n;
                let (db, dg) = (dbeta[c], dgamma[c]);
                let rows = out[off..off + plane]
                    .iter_mut()
                    .zip(&d[off..off + plane])
                    .zip(&xhat[off..off + plane]);
                for ((o, &g), &x) in rows {
                    *o = k * (n * g - db - x * dg);
                }
            }
        }
        Mode::Infer => {
            for (c, off) in channel_view(s) {
                let k = gamma.data()[c] * cache.inv_std[c];
                for (o, &g) in out[off..off + plane].iter_mut().zip(&d[off..off + plane]) {
                    *o = k * g;
                }
            }
        }
    }
    let to_tensor = |v: Vec<S>| Tensor::from_vec([1, channels, 1, 1], v).expect("channel vector");
    BatchNormGrads {
        dx,
        dgamma: to_tensor(dgamma),
        dbeta: to_tensor(dbeta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_input_normalizes_to_zero() {
        let mut st = BatchNormState::<f64>::new(2);
        let y = st.forward(&Tensor::full([3, 2, 4, 4], 2.5), Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn beta_passes_through_on_constant_input() {
        let mut st = BatchNormState::<f64>::new(1);
        st.beta = Tensor::full([1, 1, 1, 1], 7.0);
        let y = st.forward(&Tensor::full([2, 1, 3, 3], -4.0), Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn train_output_has_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::<f64>::from_fn([4, 3, 5, 6], |_, c, _, _| {
            3.0 * c as f64 + rng.gen_range(-2.0..2.0) * (c + 1) as f64
        });
        let mut st = BatchNormState::new(3);
        let y = st.forward(&x, Mode::Train).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|n| (0..5).flat_map(move |h| (0..6).map(move |w| (n, h, w))))
                .map(|(n, h, w)| y.get(n, c, h, w))
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
            assert!(var < 1.0);
        }
    }

    #[test]
    fn running_stats_follow_exponential_average() {
        let mut st = BatchNormState::<f64>::new(1);
        let x = Tensor::from_vec([1, 1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        st.forward(&x, Mode::Train).unwrap();
        assert!((st.running_mean[0] - 0.25).abs() < 1e-12);
        // unbiased batch variance 5/3
        assert!((st.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
        let before = st.clone();
        st.forward(&x, Mode::Infer).unwrap();
        assert_eq!(st, before);
    }

    #[test]
    fn single_value_per_channel_rejected_in_train_mode() {
        let mut st = BatchNormState::<f32>::new(2);
        assert!(st.forward(&Tensor::zeros([1, 2, 1, 1]), Mode::Train).is_err());
        assert!(st.forward(&Tensor::zeros([1, 2, 1, 1]), Mode::Infer).is_ok());
        assert!(st.forward(&Tensor::zeros([1, 3, 2, 2]), Mode::Infer).is_err());
    }
}
