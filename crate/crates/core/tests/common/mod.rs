//! Independent reference implementations used as test oracles. They favour
//! obviousness over speed: breadth-first flood fills over the whole image,
//! no cropping, no union-find.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::VecDeque;

use lesionseg::postprocess::{BinaryMask, ProbabilityMap};
use rand::Rng;

pub type Grid = Vec<Vec<bool>>;

pub fn to_grid(m: &BinaryMask) -> Grid {
    (0..m.height())
        .map(|y| (0..m.width()).map(|x| m.get(y, x)).collect())
        .collect()
}

fn neighbours8(y: usize, x: usize, h: usize, w: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (ny, nx) = (y as i64 + dy, x as i64 + dx);
            if (dy, dx) != (0, 0) && ny >= 0 && nx >= 0 && ny < h as i64 && nx < w as i64 {
                v.push((ny as usize, nx as usize));
            }
        }
    }
    v
}

/// 8-connected components; labels assigned in order of the first pixel met
/// in a raster scan.
pub fn flood_labels(g: &Grid) -> (Vec<Vec<u32>>, u32) {
    let (h, w) = (g.len(), g[0].len());
    let mut labels = vec![vec![0u32; w]; h];
    let mut next = 0;
    for y in 0..h {
        for x in 0..w {
            if g[y][x] && labels[y][x] == 0 {
                next += 1;
                labels[y][x] = next;
                let mut q = VecDeque::from([(y, x)]);
                while let Some((cy, cx)) = q.pop_front() {
                    for (ny, nx) in neighbours8(cy, cx, h, w) {
                        if g[ny][nx] && labels[ny][nx] == 0 {
                            labels[ny][nx] = next;
                            q.push_back((ny, nx));
                        }
                    }
                }
            }
        }
    }
    (labels, next)
}

pub fn threshold(map: &ProbabilityMap, th: f32) -> Grid {
    (0..map.height())
        .map(|y| (0..map.width()).map(|x| map.get(y, x) >= th).collect())
        .collect()
}

fn dilate(g: &Grid) -> Grid {
    let (h, w) = (g.len(), g[0].len());
    (0..h)
        .map(|y| {
            (0..w)
                .map(|x| g[y][x] || neighbours8(y, x, h, w).iter().any(|&(a, b)| g[a][b]))
                .collect()
        })
        .collect()
}

/// Erosion where pixels beyond the border count as foreground.
fn erode(g: &Grid) -> Grid {
    let (h, w) = (g.len(), g[0].len());
    (0..h)
        .map(|y| {
            (0..w)
                .map(|x| g[y][x] && neighbours8(y, x, h, w).iter().all(|&(a, b)| g[a][b]))
                .collect()
        })
        .collect()
}

/// Background reachable from the border through 4-neighbours stays
/// background; everything else becomes foreground.
fn fill_enclosed(g: &Grid) -> Grid {
    let (h, w) = (g.len(), g[0].len());
    let mut outside = vec![vec![false; w]; h];
    let mut q = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (y == 0 || x == 0 || y == h - 1 || x == w - 1) && !g[y][x] {
                outside[y][x] = true;
                q.push_back((y, x));
            }
        }
    }
    while let Some((y, x)) = q.pop_front() {
        let cand = [(y.wrapping_sub(1), x), (y + 1, x), (y, x.wrapping_sub(1)), (y, x + 1)];
        for (ny, nx) in cand {
            if ny < h && nx < w && !g[ny][nx] && !outside[ny][nx] {
                outside[ny][nx] = true;
                q.push_back((ny, nx));
            }
        }
    }
    (0..h).map(|y| (0..w).map(|x| !outside[y][x]).collect()).collect()
}

pub fn fill_holes(g: &Grid) -> Grid {
    erode(&fill_enclosed(&dilate(g)))
}

/// Mass-weighted centroid of the heaviest component at or above `th`.
pub fn center(map: &ProbabilityMap, th: f32) -> Option<(usize, usize)> {
    let (labels, k) = flood_labels(&threshold(map, th));
    let masses = masses(map, &labels, k);
    let best = heaviest(&masses)?;
    let (mut sy, mut sx, mut sm) = (0.0f64, 0.0f64, 0.0f64);
    for y in 0..map.height() {
        for x in 0..map.width() {
            if labels[y][x] == best {
                let p = f64::from(map.get(y, x));
                sy += p * y as f64;
                sx += p * x as f64;
                sm += p;
            }
        }
    }
    Some(((sy / sm).round() as usize, (sx / sm).round() as usize))
}

fn masses(map: &ProbabilityMap, labels: &[Vec<u32>], k: u32) -> Vec<f64> {
    let mut m = vec![0.0f64; k as usize + 1];
    for y in 0..map.height() {
        for x in 0..map.width() {
            if labels[y][x] > 0 {
                m[labels[y][x] as usize] += f64::from(map.get(y, x));
            }
        }
    }
    m
}

fn heaviest(masses: &[f64]) -> Option<u32> {
    let mut best: Option<u32> = None;
    for l in 1..masses.len() {
        if best.is_none() || masses[l] > masses[best.unwrap() as usize] {
            best = Some(l as u32);
        }
    }
    best
}

/// Hole-filled component `label`, restricted to the connected piece that
/// holds the component's pixels.
fn filled_piece(labels: &[Vec<u32>], label: u32) -> Grid {
    let comp: Grid = labels.iter().map(|r| r.iter().map(|&l| l == label).collect()).collect();
    let filled = fill_holes(&comp);
    let (pieces, _) = flood_labels(&filled);
    let mut keep = 0;
    'find: for (y, row) in comp.iter().enumerate() {
        for (x, &b) in row.iter().enumerate() {
            if b {
                keep = pieces[y][x];
                break 'find;
            }
        }
    }
    pieces.iter().map(|r| r.iter().map(|&l| l == keep).collect()).collect()
}

/// Which rule selected the output of [`segment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Empty,
    Direct,
    Enclosed,
    NoCenter,
    CenterOutside,
}

pub fn segment(map: &ProbabilityMap, th_h: f32, th_l: f32) -> (Grid, Branch) {
    let low = threshold(map, th_l);
    let (labels, k) = flood_labels(&low);
    if k == 0 {
        return (vec![vec![false; map.width()]; map.height()], Branch::Empty);
    }
    let c = center(map, th_h);
    if let Some((cy, cx)) = c {
        if labels[cy][cx] > 0 {
            return (filled_piece(&labels, labels[cy][cx]), Branch::Direct);
        }
        for l in 1..=k {
            let f = filled_piece(&labels, l);
            if f[cy][cx] {
                return (f, Branch::Enclosed);
            }
        }
    }
    let best = heaviest(&masses(map, &labels, k)).unwrap();
    (
        filled_piece(&labels, best),
        if c.is_none() {
            Branch::NoCenter
        } else {
            Branch::CenterOutside
        },
    )
}

/// Random map mixing Gaussian blobs, rings and noise so that every rule in
/// [`segment`] is exercised.
pub fn random_map<R: Rng>(rng: &mut R, h: usize, w: usize) -> ProbabilityMap {
    let style = rng.gen_range(0..4);
    let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..rng.gen_range(1..4))
        .map(|_| {
            (
                rng.gen_range(0.0..h as f64),
                rng.gen_range(0.0..w as f64),
                rng.gen_range(1.0..4.0),
                rng.gen_range(0.5..1.0),
                if rng.gen_bool(0.3) {
                    rng.gen_range(2.0..5.0)
                } else {
                    0.0
                },
            )
        })
        .collect();
    let noise = rng.gen_range(0.0..0.4);
    let mut v = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let p = match style {
                0 => rng.gen::<f64>(),
                _ => {
                    let mut best = 0.0f64;
                    for &(cy, cx, s, peak, ring) in &blobs {
                        let d = (y as f64 - cy).hypot(x as f64 - cx);
                        best = best.max(peak * (-((d - ring).powi(2)) / (2.0 * s * s)).exp());
                    }
                    (best + noise * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0)
                }
            };
            v.push(p as f32);
        }
    }
    ProbabilityMap::new(h, w, v).unwrap()
}

/// Map of hand-built nested rings where the centre only lies inside the
/// filled outer shapes.
pub fn ring_map(h: usize, w: usize, cy: f64, cx: f64, radii: &[(f64, f32)]) -> ProbabilityMap {
    let mut v = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let d = (y as f64 - cy).hypot(x as f64 - cx);
            for &(r, p) in radii {
                if (d - r).abs() < 0.8 {
                    v[y * w + x] = v[y * w + x].max(p);
                }
            }
        }
    }
    ProbabilityMap::new(h, w, v).unwrap()
}

/// (name, kind, kernel, out_features, batch-normalized), transcribed from
/// the layer table independently of the library.
pub const TABLE: [(&str, char, usize, usize, bool); 26] = [
    ("conv-1-1", 'c', 3, 16, true),
    ("conv-1-2", 'c', 3, 32, true),
    ("pool-1", 'p', 2, 32, false),
    ("conv-2-1", 'c', 3, 64, true),
    ("conv-2-2", 'c', 3, 64, true),
    ("pool-2", 'p', 2, 64, false),
    ("conv-3-1", 'c', 3, 128, true),
    ("conv-3-2", 'c', 4, 128, true),
    ("pool-3", 'p', 2, 128, false),
    ("conv-4-1", 'c', 3, 256, true),
    ("conv-4-2", 'c', 3, 256, true),
    ("pool-4", 'p', 2, 256, false),
    ("conv-5", 'c', 3, 512, true),
    ("decv-1", 'd', 3, 256, true),
    ("ups-1", 'u', 2, 256, false),
    ("decv-2-1", 'd', 3, 256, true),
    ("decv-2-2", 'd', 3, 128, true),
    ("ups-2", 'u', 2, 128, false),
    ("decv-3-1", 'd', 4, 128, true),
    ("decv-3-2", 'd', 3, 128, true),
    ("ups-3", 'u', 2, 128, false),
    ("decv-4-1", 'd', 3, 64, true),
    ("decv-4-2", 'd', 3, 32, true),
    ("ups-4", 'u', 2, 32, false),
    ("decv-5-1", 'd', 3, 16, true),
    ("output", 'o', 3, 1, false),
];

pub fn oracle_param_count(input_channels: usize) -> usize {
    let mut c = input_channels;
    let mut total = 0;
    for (_, kind, k, out, bn) in TABLE {
        if matches!(kind, 'c' | 'd' | 'o') {
            total += k * k * c * out + out + if bn { 2 * out } else { 0 };
            c = out;
        }
    }
    total
}
