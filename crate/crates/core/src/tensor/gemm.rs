use super::Scalar;

/// Row-major operand: `rows x cols` as seen by the product, optionally
/// stored transposed (`cols x rows` in memory).
#[derive(Clone, Copy)]
pub(crate) struct Operand<'a, S> {
    pub data: &'a [S],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a, S> Operand<'a, S> {
    pub fn new(data: &'a [S], rows: usize, cols: usize) -> Self {
        Operand {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    /// View of a `cols x rows` row-major buffer as its `rows x cols` transpose.
    pub fn transposed(data: &'a [S], rows: usize, cols: usize) -> Self {
        Operand {
            data,
            rows,
            cols,
            transposed: true,
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.rows as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

const LANES: usize = 8;

/// Sum of `f(a[i], b[i])` over independent accumulators, so the loop
/// vectorizes; the order is fixed, so results are reproducible.
#[inline]
pub(crate) fn lane_sum2<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> S {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [S::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += f(x[l], y[l]);
        }
    }
    let mut total = acc.iter().fold(S::zero(), |t, &v| t + v);
    for (&x, &y) in ra.iter().zip(rb) {
        total += f(x, y);
    }
    total
}

#[inline]
pub(crate) fn lane_sum<S: Scalar>(a: &[S], f: impl Fn(S) -> S) -> S {
    lane_sum2(a, a, |x, _| f(x))
}

/// Single-row product `c[j] = sum_p a[p] b[p][j] + beta c[j]`.
fn row_times_matrix<S: Scalar>(a: &[S], b: Operand<'_, S>, beta: S, c: &mut [S]) {
    let (k, n) = (b.rows, b.cols);
    if b.transposed {
        for (j, cj) in c[..n].iter_mut().enumerate() {
            *cj = *cj * beta + lane_sum2(&a[..k], &b.data[j * k..(j + 1) * k], |x, y| x * y);
        }
    } else {
        for v in &mut c[..n] {
            *v *= beta;
        }
        for (p, &ap) in a[..k].iter().enumerate() {
            for (cj, &bj) in c[..n].iter_mut().zip(&b.data[p * n..(p + 1) * n]) {
                *cj += ap * bj;
            }
        }
    }
}

/// `c = a * b + beta * c`, with `c` a dense row-major `a.rows x b.cols` buffer.
pub(crate) fn matmul<S: Scalar>(a: Operand<'_, S>, b: Operand<'_, S>, beta: S, c: &mut [S]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "inner extents disagree");
    assert!(a.data.len() >= m * k && b.data.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut c[..m * n] {
            *v *= beta;
        }
        return;
    }
    if m == 1 {
        // One row is contiguous in either layout.
        row_times_matrix(a.data, b, beta, c);
        return;
    }
    if k == 1 {
        for i in 0..m {
            let ai = a.data[i];
            for (j, cij) in c[i * n..(i + 1) * n].iter_mut().enumerate() {
                *cij = *cij * beta + ai * b.data[j];
            }
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: extents checked against buffer lengths above; strides describe
    // dense row-major storage of exactly those extents.
    unsafe {
        if m < 64 && n >= 4 * m {
            // Narrow outputs run faster as the transposed product c^T = b^T a^T.
            S::gemm_raw(
                n,
                k,
                m,
                S::one(),
                b.data.as_ptr(),
                csb,
                rsb,
                a.data.as_ptr(),
                csa,
                rsa,
                beta,
                c.as_mut_ptr(),
                1,
                n as isize,
            );
        } else {
            S::gemm_raw(
                m,
                k,
                n,
                S::one(),
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
            }
        }
        c
    }

    fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let mut t = vec![0.0; a.len()];
        for i in 0..rows {
            for j in 0..cols {
                t[j * rows + i] = a[i * cols + j];
            }
        }
        t
    }

    #[test]
    fn matches_naive_product_in_every_layout() {
        for &(m, k, n) in &[
            (3, 4, 5),
            (2, 7, 300),
            (70, 3, 2),
            (1, 1, 1),
            (1, 19, 40),
            (6, 1, 9),
            (1, 1, 5),
        ] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
            let want = naive(&a, m, k, &b, n);
            let at = transpose(&a, m, k);
            let bt = transpose(&b, k, n);
            for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
                let oa = if ta {
                    Operand::transposed(&at, m, k)
                } else {
                    Operand::new(&a, m, k)
                };
                let ob = if tb {
                    Operand::transposed(&bt, k, n)
                } else {
                    Operand::new(&b, k, n)
                };
                let mut c = vec![1.0; m * n];
                matmul(oa, ob, 1.0, &mut c);
                for (got, w) in c.iter().zip(&want) {
                    assert!((got - (w + 1.0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lane_sums_cover_the_remainder() {
        let v: Vec<f64> = (1..=19).map(f64::from).collect();
        assert_eq!(lane_sum(&v, |x| x), 190.0);
        assert_eq!(
            lane_sum2(&v, &v, |x, y| x * y),
            (1..=19).map(|i| f64::from(i * i)).sum::<f64>()
        );
        assert_eq!(lane_sum::<f64>(&[], |x| x), 0.0);
    }
}
