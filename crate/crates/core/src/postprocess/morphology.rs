//! 3x3 binary morphology and hole filling.

use std::collections::VecDeque;

use super::BinaryMask;

/// 3x3 dilation; pixels outside the image contribute nothing.
pub fn dilate3x3(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    BinaryMask::from_fn(h, w, |y, x| {
        (y.saturating_sub(1)..(y + 2).min(h)).any(|yy| (x.saturating_sub(1)..(x + 2).min(w)).any(|xx| mask.get(yy, xx)))
    })
}

/// 3x3 erosion. `outside` is the value assumed for pixels beyond the border.
pub fn erode3x3(mask: &BinaryMask, outside: bool) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    BinaryMask::from_fn(h, w, |y, x| {
        if !mask.get(y, x) {
            return false;
        }
        if !outside && (y == 0 || x == 0 || y + 1 == h || x + 1 == w) {
            return false;
        }
        (y.saturating_sub(1)..(y + 2).min(h)).all(|yy| (x.saturating_sub(1)..(x + 2).min(w)).all(|xx| mask.get(yy, xx)))
    })
}

/// Sets every background pixel that cannot reach the image border through
/// 4-connected background. 4-connectivity is the topological dual of the
/// 8-connected foreground, so diagonal gaps in a ring do not leak.
pub fn fill_enclosed_background(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    let mut outside = vec![false; h * w];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (y == 0 || x == 0 || y + 1 == h || x + 1 == w) && !mask.get(y, x) && !outside[y * w + x] {
                outside[y * w + x] = true;
                queue.push_back((y, x));
            }
        }
    }
    while let Some((y, x)) = queue.pop_front() {
        let mut visit = |yy: usize, xx: usize| {
            let i = yy * w + xx;
            if !mask.get(yy, xx) && !outside[i] {
                outside[i] = true;
                queue.push_back((yy, xx));
            }
        };
        if y > 0 {
            visit(y - 1, x);
        }
        if y + 1 < h {
            visit(y + 1, x);
        }
        if x > 0 {
            visit(y, x - 1);
        }
        if x + 1 < w {
            visit(y, x + 1);
        }
    }
    BinaryMask::new(h, w, outside.into_iter().map(|o| !o).collect()).expect("same extent")
}

/// Closes small gaps and fills enclosed holes: 3x3 dilation, enclosed
/// background fill, then 3x3 erosion treating the outside as foreground.
/// The result always contains the input.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    erode3x3(&fill_enclosed_background(&dilate3x3(mask)), true)
}
