//! Dual-threshold lesion extraction.
//!
//! A high threshold locates the lesion centre (the probability-weighted
//! centroid of the heaviest high-confidence component); a low threshold
//! delineates it, keeping only the hole-filled low component that contains
//! the centre.

use super::{connected_components, fill_holes, threshold, BinaryMask, LabelMap, ProbabilityMap};

pub const TH_HIGH: f32 = 0.8;
pub const TH_LOW: f32 = 0.5;

/// Sum of map values per component; index 0 is unused.
pub fn component_masses(map: &ProbabilityMap, labels: &LabelMap) -> Vec<f64> {
    let mut mass = vec![0.0f64; labels.count() + 1];
    for (&l, &p) in labels.labels().iter().zip(map.values()) {
        if l != 0 {
            mass[l as usize] += f64::from(p);
        }
    }
    mass
}

/// Label with the largest mass; ties go to the smaller label.
fn heaviest(mass: &[f64]) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (l, &m) in mass.iter().enumerate().skip(1) {
        if best.is_none_or(|(_, bm)| m > bm) {
            best = Some((l as u32, m));
        }
    }
    best.map(|(l, _)| l)
}

/// Probability-weighted centroid `(row, col)`, rounded to the nearest pixel,
/// of the heaviest component at or above `th_high`.
pub fn find_center(map: &ProbabilityMap, th_high: f32) -> Option<(usize, usize)> {
    let labels = connected_components(&threshold(map, th_high));
    let winner = heaviest(&component_masses(map, &labels))?;
    let (mut sy, mut sx, mut sm) = (0.0f64, 0.0f64, 0.0f64);
    for y in 0..map.height() {
        for x in 0..map.width() {
            if labels.get(y, x) == winner {
                let p = f64::from(map.get(y, x));
                sy += p * y as f64;
                sx += p * x as f64;
                sm += p;
            }
        }
    }
    Some(((sy / sm).round() as usize, (sx / sm).round() as usize))
}

/// Bounding box `(y0, y1, x0, x1)` (exclusive ends) of one label.
fn bounding_boxes(labels: &LabelMap) -> Vec<(usize, usize, usize, usize)> {
    let mut boxes = vec![(usize::MAX, 0, usize::MAX, 0); labels.count() + 1];
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let l = labels.get(y, x) as usize;
            if l != 0 {
                let b = &mut boxes[l];
                *b = (b.0.min(y), b.1.max(y + 1), b.2.min(x), b.3.max(x + 1));
            }
        }
    }
    boxes
}

/// Hole-filled version of component `label`, reduced to the single
/// 8-connected piece containing the original component.
fn filled_component(labels: &LabelMap, label: u32, bbox: (usize, usize, usize, usize)) -> BinaryMask {
    let (h, w) = (labels.height(), labels.width());
    // A two-pixel margin contains the dilation and keeps the crop border as
    // background connected to the true outside.
    let (y0, y1) = (bbox.0.saturating_sub(2), (bbox.1 + 2).min(h));
    let (x0, x1) = (bbox.2.saturating_sub(2), (bbox.3 + 2).min(w));
    let crop = BinaryMask::from_fn(y1 - y0, x1 - x0, |y, x| labels.get(y + y0, x + x0) == label);
    let filled = fill_holes(&crop);
    let pieces = connected_components(&filled);
    let seed = crop.data().iter().position(|&b| b).expect("component is non-empty");
    let keep = pieces.labels()[seed];
    let mut out = BinaryMask::empty(h, w);
    for y in 0..crop.height() {
        for x in 0..crop.width() {
            if pieces.get(y, x) == keep {
                out.set(y + y0, x + x0, true);
            }
        }
    }
    out
}

/// Final lesion mask from a probability map.
///
/// The result is the hole-filled low-threshold component that contains the
/// centre from [`find_center`]; a component containing the centre before
/// filling takes precedence over one that only encloses it. Without a
/// centre, or when no component contains it, the heaviest low-threshold
/// component is returned.
pub fn dual_threshold_segment(map: &ProbabilityMap, th_high: f32, th_low: f32) -> BinaryMask {
    let labels = connected_components(&threshold(map, th_low));
    if labels.count() == 0 {
        return BinaryMask::empty(map.height(), map.width());
    }
    let boxes = bounding_boxes(&labels);
    let center = find_center(map, th_high);
    if let Some((cy, cx)) = center {
        let direct = labels.get(cy, cx);
        if direct != 0 {
            return filled_component(&labels, direct, boxes[direct as usize]);
        }
        for label in 1..=labels.count() as u32 {
            let b = boxes[label as usize];
            if !(b.0..b.1).contains(&cy) || !(b.2..b.3).contains(&cx) {
                continue;
            }
            let filled = filled_component(&labels, label, b);
            if filled.get(cy, cx) {
                return filled;
            }
        }
    }
    let winner = heaviest(&component_masses(map, &labels)).expect("at least one component");
    filled_component(&labels, winner, boxes[winner as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(h: usize, w: usize, f: impl Fn(usize, usize) -> f32) -> ProbabilityMap {
        ProbabilityMap::new(
            h,
            w,
            (0..h)
                .flat_map(|y| (0..w).map(move |x| (y, x)))
                .map(|(y, x)| f(y, x))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_block_centre() {
        let m = map_from(20, 20, |y, x| {
            if (9..=11).contains(&y) && (9..=11).contains(&x) {
                0.9
            } else {
                0.0
            }
        });
        assert_eq!(find_center(&m, TH_HIGH), Some((10, 10)));
    }

    #[test]
    fn mass_beats_peak() {
        // 2 pixels at 0.95 (mass 1.9) vs 10 pixels at 0.85 (mass 8.5).
        let m = map_from(12, 12, |y, x| {
            if y == 1 && (1..=2).contains(&x) {
                0.95
            } else if (7..=8).contains(&y) && (3..=7).contains(&x) {
                0.85
            } else {
                0.1
            }
        });
        let (cy, cx) = find_center(&m, TH_HIGH).unwrap();
        assert_eq!((cy, cx), (8, 5)); // row 7.5 rounds away from zero
    }

    #[test]
    fn no_center_below_threshold() {
        assert_eq!(find_center(&map_from(5, 5, |_, _| 0.79), TH_HIGH), None);
    }

    #[test]
    fn blob_at_low_threshold_extent() {
        let m = map_from(16, 16, |y, x| {
            let d = (y as f32 - 8.0).hypot(x as f32 - 8.0);
            if d <= 2.0 {
                0.95
            } else if d <= 4.0 {
                0.6
            } else {
                0.0
            }
        });
        let seg = dual_threshold_segment(&m, TH_HIGH, TH_LOW);
        assert_eq!(seg, threshold(&m, TH_LOW));
    }

    #[test]
    fn off_center_blob_excluded() {
        let gauss = |y: usize, x: usize, cy: f32, cx: f32, peak: f32| {
            peak * (-((y as f32 - cy).powi(2) + (x as f32 - cx).powi(2)) / 8.0).exp()
        };
        let m = map_from(20, 30, |y, x| {
            gauss(y, x, 8.0, 7.0, 0.99).max(gauss(y, x, 10.0, 22.0, 0.7))
        });
        let seg = dual_threshold_segment(&m, TH_HIGH, TH_LOW);
        assert!(seg.get(8, 7));
        assert!(!seg.get(10, 22));
        assert!(threshold(&m, TH_LOW).get(10, 22));
    }

    #[test]
    fn all_low_gives_empty() {
        assert!(dual_threshold_segment(&map_from(6, 6, |_, _| 0.4), TH_HIGH, TH_LOW).is_empty());
    }

    #[test]
    fn falls_back_to_heaviest_without_center() {
        let m = map_from(10, 10, |y, x| {
            if y < 2 && x < 2 {
                0.6
            } else if y > 5 && x > 5 {
                0.7
            } else {
                0.0
            }
        });
        let seg = dual_threshold_segment(&m, TH_HIGH, TH_LOW);
        assert!(seg.get(8, 8) && !seg.get(0, 0));
    }
}
