use rand::Rng;

use super::{Scalar, Shape, Tensor};

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| v.max(S::zero()))
}

pub fn relu_backward<S: Scalar>(x: &Tensor<S>, dy: &Tensor<S>) -> Tensor<S> {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > S::zero() { g } else { S::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

/// Logistic function, kept strictly inside (0, 1) even where the
/// floating point result would round to an endpoint.
pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let lo = S::min_positive_value();
    let hi = S::one() - S::epsilon() / S::lit(2.0);
    x.map(|v| {
        let y = if v >= S::zero() {
            (S::one() + (-v).exp()).recip()
        } else {
            let e = v.exp();
            e / (S::one() + e)
        };
        y.max(lo).min(hi)
    })
}

/// Backward of [`sigmoid`] expressed through its output `y`.
pub fn sigmoid_backward<S: Scalar>(y: &Tensor<S>, dy: &Tensor<S>) -> Tensor<S> {
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&p, &g)| g * p * (S::one() - p))
        .collect();
    Tensor::from_vec(y.shape(), data).expect("same shape")
}

/// Inverted-dropout multiplier: each element is 0 with probability `p`,
/// otherwise `1 / (1 - p)`.
pub fn dropout_mask<S: Scalar, R: Rng + ?Sized>(shape: Shape, p: f64, rng: &mut R) -> Tensor<S> {
    assert!((0.0..1.0).contains(&p), "dropout probability {p} outside [0, 1)");
    let keep = S::lit(1.0 / (1.0 - p));
    let data = (0..shape.len())
        .map(|_| if rng.gen::<f64>() < p { S::zero() } else { keep })
        .collect();
    Tensor::from_vec(shape, data).expect("mask length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_and_sigmoid_values() {
        let x = Tensor::<f64>::from_vec([1, 1, 1, 3], vec![-3.0, 2.0, 0.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.0, 0.0]);
        assert_eq!(sigmoid(&x).data()[2], 0.5);
    }

    #[test]
    fn sigmoid_stays_open_interval() {
        let x = Tensor::<f32>::from_vec([1, 1, 1, 4], vec![-200.0, -30.0, 30.0, 200.0]).unwrap();
        for &v in sigmoid(&x).data() {
            assert!(v > 0.0 && v < 1.0, "{v}");
        }
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let shape = Shape::new(1, 1, 4, 4);
        let mut acc = 0.0f64;
        for _ in 0..trials {
            let m = dropout_mask::<f64, _>(shape, 0.5, &mut rng);
            acc += m.data().iter().map(|&v| 1.5 * v).sum::<f64>();
        }
        let mean = acc / (trials * shape.len()) as f64;
        assert!((mean - 1.5).abs() / 1.5 < 0.02, "mean {mean}");
    }

    #[test]
    fn dropout_mask_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = dropout_mask::<f32, _>(Shape::new(2, 3, 4, 4), 0.5, &mut rng);
        assert!(m.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let none = dropout_mask::<f32, _>(Shape::new(1, 1, 2, 2), 0.0, &mut rng);
        assert!(none.data().iter().all(|&v| v == 1.0));
    }
}
