//! 8-connected component labeling (two-pass, union-find).

use super::BinaryMask;

/// Component labels: 0 is background, components are numbered `1..=count`
/// in the raster order of their first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    count: usize,
}

impl LabelMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Mask of the pixels carrying `label`.
    pub fn component(&self, label: u32) -> BinaryMask {
        BinaryMask::new(
            self.height,
            self.width,
            self.labels.iter().map(|&l| l == label).collect(),
        )
        .expect("same extent")
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    // Keep the smaller provisional label as root so roots follow raster order.
    if ra < rb {
        parent[rb as usize] = ra;
    } else if rb < ra {
        parent[ra as usize] = rb;
    }
}

pub fn connected_components(mask: &BinaryMask) -> LabelMap {
    let (h, w) = (mask.height(), mask.width());
    let mut labels = vec![0u32; h * w];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if x > 0 && labels[y * w + x - 1] != 0 {
                neighbours[n] = labels[y * w + x - 1];
                n += 1;
            }
            if y > 0 {
                for dx in [-1isize, 0, 1] {
                    let nx = x as isize + dx;
                    if nx >= 0 && (nx as usize) < w {
                        let l = labels[(y - 1) * w + nx as usize];
                        if l != 0 {
                            neighbours[n] = l;
                            n += 1;
                        }
                    }
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let min = *neighbours[..n].iter().min().expect("non-empty");
                for &l in &neighbours[..n] {
                    union(&mut parent, min, l);
                }
                min
            };
            labels[y * w + x] = label;
        }
    }
    let mut dense = vec![0u32; parent.len()];
    let mut count = 0u32;
    for l in labels.iter_mut().filter(|l| **l != 0) {
        let root = find(&mut parent, *l) as usize;
        if dense[root] == 0 {
            count += 1;
            dense[root] = count;
        }
        *l = dense[root];
    }
    LabelMap {
        height: h,
        width: w,
        labels,
        count: count as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::new(h, w, rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect()).unwrap()
    }

    #[test]
    fn empty_mask_has_no_components() {
        let lm = connected_components(&BinaryMask::empty(4, 5));
        assert_eq!(lm.count(), 0);
        assert!(lm.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn diagonal_neighbours_join() {
        let lm = connected_components(&mask(&["#.", ".#"]));
        assert_eq!(lm.count(), 1);
        let lm = connected_components(&mask(&[".#", "#."]));
        assert_eq!(lm.count(), 1);
    }

    #[test]
    fn labels_follow_first_pixel_order() {
        let lm = connected_components(&mask(&["..#..#", "#.#...", "#.##.#", "......", "#....."]));
        assert_eq!(lm.count(), 5);
        assert_eq!(lm.get(0, 2), 1);
        assert_eq!(lm.get(0, 5), 2);
        assert_eq!(lm.get(1, 0), 3);
        assert_eq!(lm.get(2, 5), 4);
        assert_eq!(lm.get(4, 0), 5);
        assert_eq!(lm.get(2, 3), 1);
    }

    #[test]
    fn u_shape_merges_late() {
        // Two arms meet only on the bottom row.
        let lm = connected_components(&mask(&["#...#", "#...#", "#####"]));
        assert_eq!(lm.count(), 1);
        assert!(lm.labels().iter().all(|&l| l <= 1));
    }
}
