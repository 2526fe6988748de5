use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// 2x2 max pooling with stride 2. Returns the pooled tensor and, per output
/// element, the flat input index that won. Ties go to the first element in
/// row-major order.
pub fn maxpool2x2<S: Scalar>(x: &Tensor<S>) -> Result<(Tensor<S>, Vec<usize>)> {
    let s = x.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::shape(
            "maxpool2x2",
            format!("spatial extents of {s} must be even"),
        ));
    }
    let out_shape = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let mut out = Vec::with_capacity(out_shape.len());
    let mut argmax = Vec::with_capacity(out_shape.len());
    let data = x.data();
    for plane in 0..s.n * s.c {
        let base = plane * s.plane();
        for oy in 0..out_shape.h {
            for ox in 0..out_shape.w {
                let top = base + 2 * oy * s.w + 2 * ox;
                let mut best = top;
                for idx in [top + 1, top + s.w, top + s.w + 1] {
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(out_shape, out)?, argmax))
}

/// Routes each upstream gradient to the input position recorded by [`maxpool2x2`].
pub fn maxpool2x2_backward<S: Scalar>(input_shape: Shape, argmax: &[usize], dy: &Tensor<S>) -> Tensor<S> {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(dy.data()) {
        d[idx] += g;
    }
    dx
}

/// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
pub fn upsample2x2<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let s = x.shape();
    let out_shape = Shape::new(s.n, s.c, s.h * 2, s.w * 2);
    let mut out = Vec::with_capacity(out_shape.len());
    for plane in x.data().chunks(s.plane().max(1)).take(s.n * s.c) {
        for row in plane.chunks(s.w.max(1)).take(s.h) {
            for _ in 0..2 {
                for &v in row {
                    out.push(v);
                    out.push(v);
                }
            }
        }
    }
    Tensor::from_vec(out_shape, out).expect("upsampled length")
}

/// Sums the four replicated upstream gradients back onto each source pixel.
pub fn upsample2x2_backward<S: Scalar>(dy: &Tensor<S>) -> Tensor<S> {
    let s = dy.shape();
    let out_shape = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let d = dy.data();
    Tensor::from_fn(out_shape, |n, c, y, x| {
        let top = ((n * s.c + c) * s.h + 2 * y) * s.w + 2 * x;
        d[top] + d[top + 1] + d[top + s.w] + d[top + s.w + 1]
    })
}
