use super::FloatImage;

/// Source coordinate for destination index `dst` under half-pixel-centre
/// alignment, clamped to the valid range.
#[inline]
fn source_coord(dst: usize, scale: f64, len: usize) -> f64 {
    ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64)
}

/// Bilinear resize of every plane. Extents of one pixel fall back to
/// nearest-neighbour sampling along that axis.
pub fn resize_bilinear(img: &FloatImage, out_h: usize, out_w: usize) -> FloatImage {
    let (in_h, in_w) = (img.height(), img.width());
    if (in_h, in_w) == (out_h, out_w) {
        return img.clone();
    }
    let (sy, sx) = (in_h as f64 / out_h as f64, in_w as f64 / out_w as f64);
    let taps = |dst: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        if len < 2 {
            let i = (((dst as f64 + 0.5) * scale) as usize).min(len - 1);
            return (i, i, 0.0);
        }
        let s = source_coord(dst, scale, len);
        let i0 = (s.floor() as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, s - i0 as f64)
    };
    let rows: Vec<_> = (0..out_h).map(|y| taps(y, sy, in_h)).collect();
    let cols: Vec<_> = (0..out_w).map(|x| taps(x, sx, in_w)).collect();
    let mut out = FloatImage::zeros(img.channels(), out_h, out_w);
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for (y, &(y0, y1, fy)) in rows.iter().enumerate() {
            let (r0, r1) = (&src[y0 * in_w..(y0 + 1) * in_w], &src[y1 * in_w..(y1 + 1) * in_w]);
            for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
                let top = f64::from(r0[x0]) * (1.0 - fx) + f64::from(r0[x1]) * fx;
                let bottom = f64::from(r1[x0]) * (1.0 - fx) + f64::from(r1[x1]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                // Clamp guards against rounding just outside the convex hull.
                let (lo, hi) = minmax4(r0[x0], r0[x1], r1[x0], r1[x1]);
                dst[y * out_w + x] = (v as f32).clamp(lo, hi);
            }
        }
    }
    out
}

fn minmax4(a: f32, b: f32, c: f32, d: f32) -> (f32, f32) {
    (a.min(b).min(c).min(d), a.max(b).max(c).max(d))
}
