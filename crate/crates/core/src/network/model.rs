use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers::{cdnn_layers, Activation, LayerKind, LayerSpec};
use crate::error::{Error, Result};
use crate::tensor::{
    batchnorm_forward, conv2d, maxpool2x2, relu, sigmoid, transposed_conv2d, upsample2x2, BatchNormState, GradTape,
    Mode, Scalar, Shape, Tensor, Var,
};

/// Default number of input planes: R, G, B, H, S, V, L.
pub const INPUT_CHANNELS: usize = 7;

/// Trainable tensors of one convolutional or deconvolutional row.
///
/// Convolution weights are `(out, in, kh, kw)`; deconvolution weights are
/// `(in, out, kh, kw)`. Biases are `(1, out, 1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<S: Scalar = f32> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub bn: Option<BatchNormState<S>>,
}

impl<S: Scalar> LayerParams<S> {
    /// Trainable elements; running statistics excluded.
    pub fn count(&self) -> usize {
        self.weight.len() + self.bias.len() + self.bn.as_ref().map_or(0, |b| b.gamma.len() + b.beta.len())
    }

    fn cast<T: Scalar>(&self) -> LayerParams<T> {
        LayerParams {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            bn: self.bn.as_ref().map(BatchNormState::cast),
        }
    }
}

/// Output extent of one layer, as recorded by [`Network::infer_traced`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerTrace {
    pub name: &'static str,
    pub shape: Shape,
}

/// The segmentation network: an ordered layer table with one parameter
/// slot per row (empty for pooling and upsampling rows).
#[derive(Clone, Debug, PartialEq)]
pub struct Network<S: Scalar = f32> {
    layers: Vec<LayerSpec>,
    input_channels: usize,
    params: Vec<Option<LayerParams<S>>>,
}

/// Weight tensor shape of a parameterized row given its input channel count.
pub(crate) fn weight_shape(spec: &LayerSpec, in_ch: usize) -> Shape {
    let (kh, kw) = spec.filter;
    match spec.kind {
        LayerKind::Deconv => Shape::new(in_ch, spec.out_features, kh, kw),
        _ => Shape::new(spec.out_features, in_ch, kh, kw),
    }
}

impl<S: Scalar> Network<S> {
    /// Builds the network with He-normal weights, zero biases and identity
    /// batch normalization.
    pub fn build<R: Rng + ?Sized>(input_channels: usize, rng: &mut R) -> Result<Self> {
        if input_channels == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one input channel".into(),
            ));
        }
        let layers = cdnn_layers();
        let mut params = Vec::with_capacity(layers.len());
        let mut channels = input_channels;
        for spec in &layers {
            if !spec.kind.has_params() {
                params.push(None);
                continue;
            }
            let shape = weight_shape(spec, channels);
            let fan_in = (channels * spec.filter.0 * spec.filter.1) as f64;
            let std = (2.0 / fan_in).sqrt();
            let data = (0..shape.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    S::lit(z * std)
                })
                .collect();
            params.push(Some(LayerParams {
                weight: Tensor::from_vec(shape, data)?,
                bias: Tensor::zeros([1, spec.out_features, 1, 1]),
                bn: spec.has_batchnorm.then(|| BatchNormState::new(spec.out_features)),
            }));
            channels = spec.out_features;
        }
        Ok(Network {
            layers,
            input_channels,
            params,
        })
    }

    /// Assembles a network from explicit per-row parameters, validating every
    /// shape against the layer table.
    pub fn from_parts(input_channels: usize, params: Vec<Option<LayerParams<S>>>) -> Result<Self> {
        let layers = cdnn_layers();
        if params.len() != layers.len() || input_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "expected {} layer slots for {input_channels} input channels, got {}",
                layers.len(),
                params.len()
            )));
        }
        let mut channels = input_channels;
        for (spec, p) in layers.iter().zip(&params) {
            let bad = |detail: String| Error::Layer {
                layer: spec.name.to_string(),
                detail,
            };
            match (spec.kind.has_params(), p) {
                (false, None) => continue,
                (false, Some(_)) => return Err(bad("row carries no parameters".into())),
                (true, None) => return Err(bad("missing parameters".into())),
                (true, Some(p)) => {
                    let ws = weight_shape(spec, channels);
                    if p.weight.shape() != ws {
                        return Err(bad(format!("weight {} expected {ws}", p.weight.shape())));
                    }
                    if p.bias.len() != spec.out_features {
                        return Err(bad(format!("bias has {} entries", p.bias.len())));
                    }
                    match (&p.bn, spec.has_batchnorm) {
                        (Some(bn), true) => {
                            let c = spec.out_features;
                            if bn.gamma.len() != c
                                || bn.beta.len() != c
                                || bn.running_mean.len() != c
                                || bn.running_var.len() != c
                            {
                                return Err(bad("batch-norm state does not match channel count".into()));
                            }
                        }
                        (None, false) => {}
                        _ => return Err(bad("batch-norm presence disagrees with layer table".into())),
                    }
                    channels = spec.out_features;
                }
            }
        }
        Ok(Network {
            layers,
            input_channels,
            params,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn layer_params(&self) -> &[Option<LayerParams<S>>] {
        &self.params
    }

    pub fn params_of(&self, name: &str) -> Option<&LayerParams<S>> {
        let idx = self.layers.iter().position(|l| l.name == name)?;
        self.params[idx].as_ref()
    }

    /// Weights, biases and batch-norm scale/shift; running statistics are
    /// not trainable and are excluded.
    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(LayerParams::count).sum()
    }

    /// Overrides the rate of every dropout site in the table.
    pub fn set_dropout(&mut self, p: f64) {
        for l in &mut self.layers {
            if l.dropout_before.is_some() {
                l.dropout_before = Some(p);
            }
        }
    }

    /// Trainable tensors in canonical order: per row weight, bias, then
    /// gamma and beta when batch-normalized.
    pub fn parameters(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::new();
        for p in self.params.iter().flatten() {
            out.push(&p.weight);
            out.push(&p.bias);
            if let Some(bn) = &p.bn {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    /// Mutable counterpart of [`Network::parameters`], same order.
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        for p in self.params.iter_mut().flatten() {
            out.push(&mut p.weight);
            out.push(&mut p.bias);
            if let Some(bn) = &mut p.bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    /// Names matching [`Network::parameters`], e.g. `conv-1-1.weight`.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (spec, p) in self.layers.iter().zip(&self.params) {
            if let Some(p) = p {
                out.push(format!("{}.weight", spec.name));
                out.push(format!("{}.bias", spec.name));
                if p.bn.is_some() {
                    out.push(format!("{}.gamma", spec.name));
                    out.push(format!("{}.beta", spec.name));
                }
            }
        }
        out
    }

    pub fn cast<T: Scalar>(&self) -> Network<T> {
        Network {
            layers: self.layers.clone(),
            input_channels: self.input_channels,
            params: self.params.iter().map(|p| p.as_ref().map(LayerParams::cast)).collect(),
        }
    }

    fn check_input(&self, s: Shape) -> Result<()> {
        if s.c != self.input_channels || s.n == 0 {
            return Err(Error::Layer {
                layer: self.layers[0].name.to_string(),
                detail: format!(
                    "input {s} must have {} channels and a non-empty batch",
                    self.input_channels
                ),
            });
        }
        Ok(())
    }

    /// Output extents of every row for an input of the given shape, computed
    /// from the table alone.
    pub fn layer_shapes(&self, input: Shape) -> Result<Vec<LayerTrace>> {
        self.check_input(input)?;
        let mut s = input;
        let mut out = Vec::with_capacity(self.layers.len());
        for spec in &self.layers {
            s = match spec.kind {
                LayerKind::Pool => {
                    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
                        return Err(Error::Layer {
                            layer: spec.name.to_string(),
                            detail: format!("cannot pool odd extent {s}"),
                        });
                    }
                    Shape::new(s.n, s.c, s.h / 2, s.w / 2)
                }
                LayerKind::Upsample => Shape::new(s.n, s.c, s.h * 2, s.w * 2),
                _ => Shape::new(s.n, spec.out_features, s.h, s.w),
            };
            out.push(LayerTrace {
                name: spec.name,
                shape: s,
            });
        }
        Ok(out)
    }

    /// Deterministic inference pass (running statistics, no dropout).
    pub fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.infer_traced(x).map(|(y, _)| y)
    }

    /// Inference that also reports the output extent of every row.
    pub fn infer_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Vec<LayerTrace>)> {
        self.check_input(x.shape())?;
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (spec, p) in self.layers.iter().zip(&self.params) {
            let step = || -> Result<Tensor<S>> {
                let mut y = match (spec.kind, p) {
                    (LayerKind::Pool, _) => maxpool2x2(&cur)?.0,
                    (LayerKind::Upsample, _) => upsample2x2(&cur),
                    (LayerKind::Deconv, Some(p)) => transposed_conv2d(&cur, &p.weight, &p.bias)?,
                    (_, Some(p)) => conv2d(&cur, &p.weight, &p.bias)?,
                    (_, None) => unreachable!("parameterized row without parameters"),
                };
                if let Some(bn) = p.as_ref().and_then(|p| p.bn.as_ref()) {
                    let mut state = bn.clone();
                    y = batchnorm_forward(&y, &bn.gamma, &bn.beta, &mut state, Mode::Infer)?.0;
                }
                Ok(match spec.activation {
                    Activation::Relu => relu(&y),
                    Activation::Sigmoid => sigmoid(&y),
                    Activation::None => y,
                })
            };
            cur = step().map_err(|e| Error::Layer {
                layer: spec.name.to_string(),
                detail: e.to_string(),
            })?;
            trace.push(LayerTrace {
                name: spec.name,
                shape: cur.shape(),
            });
        }
        Ok((cur, trace))
    }

    /// Records a forward pass on `tape`. Parameters are registered as leaves;
    /// their handles are returned in [`Network::parameters`] order. In train
    /// mode batch-norm running statistics are updated.
    pub fn forward_tape<R: Rng + ?Sized>(
        &mut self,
        tape: &mut GradTape<S>,
        x: Var,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Var, Vec<Var>)> {
        self.check_input(tape.value(x).shape())?;
        let mut handles = Vec::new();
        let mut cur = x;
        for (spec, p) in self.layers.iter().zip(self.params.iter_mut()) {
            let mut step = || -> Result<Var> {
                let mut h = cur;
                if let Some(rate) = spec.dropout_before {
                    h = tape.dropout(h, rate, mode, rng);
                }
                h = match (spec.kind, p.as_mut()) {
                    (LayerKind::Pool, _) => tape.maxpool2x2(h)?,
                    (LayerKind::Upsample, _) => tape.upsample2x2(h),
                    (kind, Some(p)) => {
                        let w = tape.param(p.weight.clone());
                        let b = tape.param(p.bias.clone());
                        handles.extend([w, b]);
                        let mut y = if kind == LayerKind::Deconv {
                            tape.transposed_conv2d(h, w, b)?
                        } else {
                            tape.conv2d(h, w, b)?
                        };
                        if let Some(bn) = p.bn.as_mut() {
                            let g = tape.param(bn.gamma.clone());
                            let be = tape.param(bn.beta.clone());
                            handles.extend([g, be]);
                            y = tape.batchnorm(y, g, be, bn, mode)?;
                        }
                        y
                    }
                    (_, None) => unreachable!("parameterized row without parameters"),
                };
                Ok(match spec.activation {
                    Activation::Relu => tape.relu(h),
                    Activation::Sigmoid => tape.sigmoid(h),
                    Activation::None => h,
                })
            };
            cur = step().map_err(|e| Error::Layer {
                layer: spec.name.to_string(),
                detail: e.to_string(),
            })?;
        }
        Ok((cur, handles))
    }

    /// Forward pass in either mode. Train mode draws dropout masks from `rng`
    /// and updates batch-norm running statistics.
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<S>, mode: Mode, rng: &mut R) -> Result<Tensor<S>> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => {
                let mut tape = GradTape::new();
                let xv = tape.leaf(x.clone().with_requires_grad(false));
                let (y, _) = self.forward_tape(&mut tape, xv, mode, rng)?;
                Ok(tape.value(y).clone())
            }
        }
    }
}

impl Network<f32> {
    /// [`Network::build`] with the standard seven input planes and a seeded generator.
    pub fn cdnn(seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Network::build(INPUT_CHANNELS, &mut rng).expect("seven input channels")
    }
}
