//! Reverse-mode differentiation over the network primitives.

use rand::Rng;

use super::{
    batchnorm_backward, batchnorm_forward, conv2d, conv2d_backward, dropout_mask, maxpool2x2, maxpool2x2_backward,
    relu, relu_backward, sigmoid, sigmoid_backward, transposed_conv2d, transposed_conv2d_backward, upsample2x2,
    upsample2x2_backward, BatchNormCache, BatchNormState, Mode, Scalar, Shape, Tensor,
};
use crate::error::{Error, Result};
use crate::training::loss::{jaccard_loss, jaccard_loss_grad};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<S: Scalar> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
    },
    TransposedConv2d {
        x: Var,
        w: Var,
        b: Var,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        x: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: BatchNormCache<S>,
    },
    Relu {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    Dropout {
        x: Var,
        mask: Tensor<S>,
    },
    Add {
        a: Var,
        b: Var,
    },
    WeightedSum {
        x: Var,
        weights: Tensor<S>,
    },
    JaccardLoss {
        p: Var,
        target: Tensor<S>,
        smoothing: S,
    },
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

/// Records operations in execution order; [`GradTape::backward`] replays
/// them in reverse, summing the contributions of every consumer.
pub struct GradTape<S: Scalar = f32> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for GradTape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> GradTape<S> {
    pub fn new() -> Self {
        GradTape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers an input. Gradients are tracked iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        let requires_grad = t.requires_grad();
        self.push(t, Op::Leaf, requires_grad)
    }

    /// Registers a trainable parameter (always tracked).
    pub fn param(&mut self, t: Tensor<S>) -> Var {
        self.push(t.with_requires_grad(true), Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = conv2d(self.value(x), self.value(w), self.value(b))?;
        let rg = self.tracked(x) || self.tracked(w) || self.tracked(b);
        Ok(self.push(y, Op::Conv2d { x, w, b }, rg))
    }

    pub fn transposed_conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = transposed_conv2d(self.value(x), self.value(w), self.value(b))?;
        let rg = self.tracked(x) || self.tracked(w) || self.tracked(b);
        Ok(self.push(y, Op::TransposedConv2d { x, w, b }, rg))
    }

    pub fn maxpool2x2(&mut self, x: Var) -> Result<Var> {
        let (y, argmax) = maxpool2x2(self.value(x))?;
        let rg = self.tracked(x);
        Ok(self.push(y, Op::MaxPool { x, argmax }, rg))
    }

    pub fn upsample2x2(&mut self, x: Var) -> Var {
        let y = upsample2x2(self.value(x));
        let rg = self.tracked(x);
        self.push(y, Op::Upsample { x }, rg)
    }

    /// Batch normalization; `state` supplies (and in train mode updates) the
    /// running statistics, `gamma`/`beta` are the recorded scale and shift.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<S>,
        mode: Mode,
    ) -> Result<Var> {
        let (y, cache) = batchnorm_forward(self.value(x), self.value(gamma), self.value(beta), state, mode)?;
        let rg = self.tracked(x) || self.tracked(gamma) || self.tracked(beta);
        Ok(self.push(y, Op::BatchNorm { x, gamma, beta, cache }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = relu(self.value(x));
        let rg = self.tracked(x);
        self.push(y, Op::Relu { x }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = sigmoid(self.value(x));
        let rg = self.tracked(x);
        self.push(y, Op::Sigmoid { x }, rg)
    }

    /// Inverted dropout in train mode; identity (no node recorded) in infer mode.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, mode: Mode, rng: &mut R) -> Var {
        if mode == Mode::Infer || p == 0.0 {
            return x;
        }
        let mask = dropout_mask(self.value(x).shape(), p, rng);
        let y = Tensor::from_vec(
            mask.shape(),
            self.value(x)
                .data()
                .iter()
                .zip(mask.data())
                .map(|(&v, &m)| v * m)
                .collect(),
        )
        .expect("same shape");
        let rg = self.tracked(x);
        self.push(y, Op::Dropout { x, mask }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("add", format!("{} + {}", va.shape(), vb.shape())));
        }
        let mut y = va.clone().with_requires_grad(false);
        y.add_assign(vb);
        let rg = self.tracked(a) || self.tracked(b);
        Ok(self.push(y, Op::Add { a, b }, rg))
    }

    /// Scalar `sum(x * weights)`, shaped `(1, 1, 1, 1)`.
    pub fn weighted_sum(&mut self, x: Var, weights: Tensor<S>) -> Result<Var> {
        self.value(x).ensure_shape("weighted_sum", weights.shape())?;
        let y = Tensor::full([1, 1, 1, 1], self.value(x).dot(&weights));
        let rg = self.tracked(x);
        Ok(self.push(y, Op::WeightedSum { x, weights }, rg))
    }

    /// Scalar Jaccard-distance loss of prediction `p` against `target`.
    pub fn jaccard_loss(&mut self, p: Var, target: Tensor<S>, smoothing: S) -> Result<Var> {
        let loss = jaccard_loss(target.data(), self.value(p).data(), smoothing)?;
        let rg = self.tracked(p);
        Ok(self.push(
            Tensor::full([1, 1, 1, 1], loss),
            Op::JaccardLoss { p, target, smoothing },
            rg,
        ))
    }

    /// Gradients of the scalar `output` with respect to every tracked leaf.
    pub fn backward(&self, output: Var) -> Result<Gradients<S>> {
        let out_shape = self.value(output).shape();
        if out_shape.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("output must be a scalar, got {out_shape}"),
            ));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(out_shape, S::one()));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let dy = match &node.op {
                Op::Leaf => continue,
                _ => match grads[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            let mut acc = |v: Var, g: Tensor<S>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Conv2d { x, w, b } => {
                    let g = conv2d_backward(self.value(*x), self.value(*w), &dy, self.tracked(*x))?;
                    if let Some(dx) = g.dx {
                        acc(*x, dx);
                    }
                    acc(*w, g.dw);
                    acc(*b, g.db);
                }
                Op::TransposedConv2d { x, w, b } => {
                    let g = transposed_conv2d_backward(self.value(*x), self.value(*w), &dy, self.tracked(*x))?;
                    if let Some(dx) = g.dx {
                        acc(*x, dx);
                    }
                    acc(*w, g.dw);
                    acc(*b, g.db);
                }
                Op::MaxPool { x, argmax } => {
                    acc(*x, maxpool2x2_backward(self.value(*x).shape(), argmax, &dy));
                }
                Op::Upsample { x } => acc(*x, upsample2x2_backward(&dy)),
                Op::BatchNorm { x, gamma, beta, cache } => {
                    let g = batchnorm_backward(self.value(*gamma), cache, &dy);
                    acc(*x, g.dx);
                    acc(*gamma, g.dgamma);
                    acc(*beta, g.dbeta);
                }
                Op::Relu { x } => acc(*x, relu_backward(self.value(*x), &dy)),
                Op::Sigmoid { x } => acc(*x, sigmoid_backward(&node.value, &dy)),
                Op::Dropout { x, mask } => {
                    let data = dy.data().iter().zip(mask.data()).map(|(&g, &m)| g * m).collect();
                    acc(*x, Tensor::from_vec(dy.shape(), data).expect("same shape"));
                }
                Op::Add { a, b } => {
                    acc(*a, dy.clone());
                    acc(*b, dy);
                }
                Op::WeightedSum { x, weights } => {
                    let s = dy.data()[0];
                    acc(*x, weights.map(|v| v * s));
                }
                Op::JaccardLoss { p, target, smoothing } => {
                    let s = dy.data()[0];
                    let g = jaccard_loss_grad(target.data(), self.value(*p).data(), *smoothing)?;
                    let shape: Shape = self.value(*p).shape();
                    acc(*p, Tensor::from_vec(shape, g.into_iter().map(|v| v * s).collect())?);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Leaf gradients produced by [`GradTape::backward`].
pub struct Gradients<S: Scalar> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<S>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reused_tensor_accumulates_both_branches() {
        // y = sum(relu(x) * a) + sum(relu(x) * b) must equal sum(relu(x) * (a + b)).
        let x = Tensor::<f64>::from_vec([1, 1, 2, 3], vec![-1.0, 0.5, 2.0, -0.3, 1.5, 0.7])
            .unwrap()
            .with_requires_grad(true);
        let a = Tensor::from_vec([1, 1, 2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let b = Tensor::from_vec([1, 1, 2, 3], vec![1.0, -2.0, 3.0, -4.0, 5.0, -6.0]).unwrap();
        let mut merged = a.clone();
        merged.add_assign(&b);

        let mut tape = GradTape::new();
        let xv = tape.leaf(x.clone());
        let r = tape.relu(xv);
        let ya = tape.weighted_sum(r, a).unwrap();
        let yb = tape.weighted_sum(r, b).unwrap();
        let y = tape.add(ya, yb).unwrap();
        let split = tape.backward(y).unwrap().get(xv).unwrap().clone();

        let mut tape = GradTape::new();
        let xv = tape.leaf(x);
        let r = tape.relu(xv);
        let y = tape.weighted_sum(r, merged).unwrap();
        let joint = tape.backward(y).unwrap().get(xv).unwrap().clone();

        assert_eq!(split.data(), joint.data());
        assert_eq!(joint.data(), &[0.0, -1.8, 3.3, 0.0, 5.5, -5.4]);
    }

    #[test]
    fn untracked_leaves_get_no_gradient() {
        let mut tape = GradTape::<f64>::new();
        let x = tape.leaf(Tensor::full([1, 1, 2, 2], 1.0));
        let w = tape.param(Tensor::full([1, 1, 1, 1], 2.0));
        let b = tape.param(Tensor::zeros([1, 1, 1, 1]));
        let y = tape.conv2d(x, w, b).unwrap();
        let s = tape.weighted_sum(y, Tensor::full([1, 1, 2, 2], 1.0)).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(x).is_none());
        assert_eq!(g.get(w).unwrap().data(), &[4.0]);
        assert_eq!(g.get(b).unwrap().data(), &[4.0]);
    }

    #[test]
    fn backward_requires_scalar_output() {
        let mut tape = GradTape::<f32>::new();
        let x = tape.param(Tensor::zeros([1, 1, 2, 2]));
        assert!(tape.backward(x).is_err());
    }
}
