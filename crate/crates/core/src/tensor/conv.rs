//! Stride-1 "same" convolution and its adjoint, lowered to GEMM via im2col.
//!
//! Kernels are applied as cross-correlation (no flip). For an even kernel
//! extent `k` the input is padded by `(k - 1) / 2` before and `k / 2` after,
//! so the extra row/column lands at the bottom/right.

use super::gemm::{matmul, Operand};
use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Padding `(before, after)` that keeps a stride-1 output the size of the input.
pub const fn same_padding(k: usize) -> (usize, usize) {
    ((k - 1) / 2, k / 2)
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Valid output column range `[lo, hi)` for kernel column offset `kx`.
    #[inline]
    fn x_range(&self, kx: usize) -> (usize, usize) {
        let pad = same_padding(self.kw).0;
        let lo = pad.saturating_sub(kx);
        let hi = (self.w + pad).saturating_sub(kx).min(self.w);
        (lo, hi.max(lo))
    }
}

/// Unfolds one image `(channels, h, w)` into a `(channels*kh*kw, h*w)` matrix.
fn im2col<S: Scalar>(src: &[S], g: Geometry, col: &mut [S]) {
    let (pt, pl) = (same_padding(g.kh).0, same_padding(g.kw).0);
    let plane = g.plane();
    for c in 0..g.channels {
        let src_plane = &src[c * plane..(c + 1) * plane];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut col[row * plane..(row + 1) * plane];
                let (lo, hi) = g.x_range(kx);
                for y in 0..g.h {
                    let out = &mut dst[y * g.w..(y + 1) * g.w];
                    let sy = y + ky;
                    if sy < pt || sy - pt >= g.h {
                        out.fill(S::zero());
                        continue;
                    }
                    let src_row = &src_plane[(sy - pt) * g.w..(sy - pt + 1) * g.w];
                    out[..lo].fill(S::zero());
                    out[hi..].fill(S::zero());
                    if lo < hi {
                        out[lo..hi].copy_from_slice(&src_row[lo + kx - pl..hi + kx - pl]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters and accumulates columns back into an image.
fn col2im<S: Scalar>(col: &[S], g: Geometry, dst: &mut [S]) {
    let (pt, pl) = (same_padding(g.kh).0, same_padding(g.kw).0);
    let plane = g.plane();
    for c in 0..g.channels {
        let dst_plane = &mut dst[c * plane..(c + 1) * plane];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &col[row * plane..(row + 1) * plane];
                let (lo, hi) = g.x_range(kx);
                if lo >= hi {
                    continue;
                }
                for y in 0..g.h {
                    let sy = y + ky;
                    if sy < pt || sy - pt >= g.h {
                        continue;
                    }
                    let out = &mut dst_plane[(sy - pt) * g.w..(sy - pt + 1) * g.w];
                    let inp = &src[y * g.w..(y + 1) * g.w];
                    for (o, &v) in out[lo + kx - pl..hi + kx - pl].iter_mut().zip(&inp[lo..hi]) {
                        *o += v;
                    }
                }
            }
        }
    }
}

fn check_bias<S: Scalar>(op: &'static str, b: &Tensor<S>, channels: usize) -> Result<()> {
    if b.len() != channels {
        return Err(Error::shape(
            op,
            format!("bias has {} entries for {channels} output channels", b.len()),
        ));
    }
    Ok(())
}

fn check_kernel<S: Scalar>(op: &'static str, w: &Tensor<S>) -> Result<()> {
    let ws = w.shape();
    if ws.h == 0 || ws.w == 0 || ws.n == 0 || ws.c == 0 {
        return Err(Error::shape(op, format!("degenerate kernel {ws}")));
    }
    Ok(())
}

/// Gradients of a convolution with respect to its operands.
#[derive(Clone, Debug)]
pub struct ConvGrads<S: Scalar> {
    pub dx: Option<Tensor<S>>,
    pub dw: Tensor<S>,
    pub db: Tensor<S>,
}

fn bias_grad<S: Scalar>(dy: &Tensor<S>) -> Tensor<S> {
    let s = dy.shape();
    let plane = s.plane();
    let mut db = vec![S::zero(); s.c];
    for n in 0..s.n {
        for (c, acc) in db.iter_mut().enumerate() {
            let start = (n * s.c + c) * plane;
            *acc += dy.data()[start..start + plane].iter().copied().sum();
        }
    }
    Tensor::from_vec(Shape::new(1, s.c, 1, 1), db).expect("bias length")
}

fn fill_bias<S: Scalar>(out: &mut [S], b: &[S], plane: usize) {
    for (chunk, &bias) in out.chunks_mut(plane).zip(b) {
        chunk.fill(bias);
    }
}

/// Stride-1 same-padded cross-correlation. `w` is `(out_ch, in_ch, kh, kw)`,
/// `b` holds one bias per output channel.
pub fn conv2d<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    check_kernel("conv2d", w)?;
    let (xs, ws) = (x.shape(), w.shape());
    if xs.c != ws.c {
        return Err(Error::shape(
            "conv2d",
            format!("input {xs} has {} channels, kernel {ws} expects {}", xs.c, ws.c),
        ));
    }
    check_bias("conv2d", b, ws.n)?;
    let g = Geometry {
        channels: xs.c,
        h: xs.h,
        w: xs.w,
        kh: ws.h,
        kw: ws.w,
    };
    let out_shape = Shape::new(xs.n, ws.n, xs.h, xs.w);
    let mut out = Tensor::zeros(out_shape);
    let mut col = vec![S::zero(); g.rows() * g.plane()];
    let out_item = out_shape.item();
    for n in 0..xs.n {
        im2col(x.item(n), g, &mut col);
        let dst = &mut out.data_mut()[n * out_item..(n + 1) * out_item];
        fill_bias(dst, b.data(), g.plane());
        matmul(
            Operand::new(w.data(), ws.n, g.rows()),
            Operand::new(&col, g.rows(), g.plane()),
            S::one(),
            dst,
        );
    }
    Ok(out)
}

/// Backward pass of [`conv2d`]. The input gradient is only formed when `need_dx`.
pub fn conv2d_backward<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, dy: &Tensor<S>, need_dx: bool) -> Result<ConvGrads<S>> {
    let (xs, ws) = (x.shape(), w.shape());
    dy.ensure_shape("conv2d_backward", Shape::new(xs.n, ws.n, xs.h, xs.w))?;
    let g = Geometry {
        channels: xs.c,
        h: xs.h,
        w: xs.w,
        kh: ws.h,
        kw: ws.w,
    };
    let (rows, plane) = (g.rows(), g.plane());
    let mut col = vec![S::zero(); rows * plane];
    let mut dcol = if need_dx {
        vec![S::zero(); rows * plane]
    } else {
        Vec::new()
    };
    let mut dw = Tensor::zeros(ws);
    let mut dx = need_dx.then(|| Tensor::zeros(xs));
    let dy_item = dy.shape().item();
    for n in 0..xs.n {
        let dy_n = &dy.data()[n * dy_item..(n + 1) * dy_item];
        im2col(x.item(n), g, &mut col);
        let beta = if n == 0 { S::zero() } else { S::one() };
        matmul(
            Operand::new(dy_n, ws.n, plane),
            Operand::transposed(&col, plane, rows),
            beta,
            dw.data_mut(),
        );
        if let Some(dx) = dx.as_mut() {
            matmul(
                Operand::transposed(w.data(), rows, ws.n),
                Operand::new(dy_n, ws.n, plane),
                S::zero(),
                &mut dcol,
            );
            let item = xs.item();
            col2im(&dcol, g, &mut dx.data_mut()[n * item..(n + 1) * item]);
        }
    }
    Ok(ConvGrads {
        dx,
        dw,
        db: bias_grad(dy),
    })
}

/// Adjoint of [`conv2d`] (stride-1 deconvolution). `w` is `(in_ch, out_ch, kh, kw)`:
/// the same layout as the convolution mapping `out_ch -> in_ch` that this
/// operation transposes.
pub fn transposed_conv2d<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    check_kernel("transposed_conv2d", w)?;
    let (xs, ws) = (x.shape(), w.shape());
    if xs.c != ws.n {
        return Err(Error::shape(
            "transposed_conv2d",
            format!("input {xs} has {} channels, kernel {ws} expects {}", xs.c, ws.n),
        ));
    }
    check_bias("transposed_conv2d", b, ws.c)?;
    let g = Geometry {
        channels: ws.c,
        h: xs.h,
        w: xs.w,
        kh: ws.h,
        kw: ws.w,
    };
    let (rows, plane) = (g.rows(), g.plane());
    let out_shape = Shape::new(xs.n, ws.c, xs.h, xs.w);
    let mut out = Tensor::zeros(out_shape);
    let mut col = vec![S::zero(); rows * plane];
    let out_item = out_shape.item();
    for n in 0..xs.n {
        matmul(
            Operand::transposed(w.data(), rows, ws.n),
            Operand::new(x.item(n), ws.n, plane),
            S::zero(),
            &mut col,
        );
        let dst = &mut out.data_mut()[n * out_item..(n + 1) * out_item];
        fill_bias(dst, b.data(), plane);
        col2im(&col, g, dst);
    }
    Ok(out)
}

/// Backward pass of [`transposed_conv2d`].
pub fn transposed_conv2d_backward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    dy: &Tensor<S>,
    need_dx: bool,
) -> Result<ConvGrads<S>> {
    let (xs, ws) = (x.shape(), w.shape());
    dy.ensure_shape("transposed_conv2d_backward", Shape::new(xs.n, ws.c, xs.h, xs.w))?;
    let g = Geometry {
        channels: ws.c,
        h: xs.h,
        w: xs.w,
        kh: ws.h,
        kw: ws.w,
    };
    let (rows, plane) = (g.rows(), g.plane());
    let mut col = vec![S::zero(); rows * plane];
    let mut dw = Tensor::zeros(ws);
    let mut dx = need_dx.then(|| Tensor::zeros(xs));
    let dy_item = dy.shape().item();
    for n in 0..xs.n {
        im2col(&dy.data()[n * dy_item..(n + 1) * dy_item], g, &mut col);
        let beta = if n == 0 { S::zero() } else { S::one() };
        matmul(
            Operand::new(x.item(n), ws.n, plane),
            Operand::transposed(&col, plane, rows),
            beta,
            dw.data_mut(),
        );
        if let Some(dx) = dx.as_mut() {
            let item = xs.item();
            matmul(
                Operand::new(w.data(), ws.n, rows),
                Operand::new(&col, rows, plane),
                S::zero(),
                &mut dx.data_mut()[n * item..(n + 1) * item],
            );
        }
    }
    Ok(ConvGrads {
        dx,
        dw,
        db: bias_grad(dy),
    })
}
