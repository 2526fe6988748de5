//! From probability maps to final lesion masks: thresholds, connected
//! components, hole filling, ensemble averaging.

mod components;
mod morphology;
mod segment;

pub use components::{connected_components, LabelMap};
pub use morphology::{dilate3x3, erode3x3, fill_enclosed_background, fill_holes};
pub use segment::{component_masses, dual_threshold_segment, find_center, TH_HIGH, TH_LOW};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Per-pixel lesion probability in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if height * width != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {height}x{width} map",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("probability {v} outside [0, 1]")));
        }
        Ok(ProbabilityMap { height, width, values })
    }

    /// Extracts batch item `n` of a single-channel network output.
    pub fn from_tensor<S: Scalar>(t: &Tensor<S>, n: usize) -> Result<Self> {
        let s = t.shape();
        if s.c != 1 || n >= s.n {
            return Err(Error::shape("probability_map", format!("item {n} of {s}")));
        }
        Self::new(s.h, s.w, t.item(n).iter().map(|v| v.as_f64() as f32).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

/// Binary lesion mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if height * width != data.len() {
            return Err(Error::InvalidArgument(format!(
                "{} pixels for a {height}x{width} mask",
                data.len()
            )));
        }
        Ok(BinaryMask { height, width, data })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        BinaryMask {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (y, x)))
            .map(|(y, x)| f(y, x))
            .collect();
        BinaryMask { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Foreground as `1.0`, background as `0.0`.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Foreground where the probability is at least `th`.
pub fn threshold(map: &ProbabilityMap, th: f32) -> BinaryMask {
    BinaryMask {
        height: map.height,
        width: map.width,
        data: map.values.iter().map(|&v| v >= th).collect(),
    }
}

/// Pixelwise arithmetic mean of the member maps.
pub fn ensemble_average(maps: &[ProbabilityMap]) -> Result<ProbabilityMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidArgument("ensemble needs at least one map".into()))?;
    if let Some(m) = maps.iter().find(|m| (m.height, m.width) != (first.height, first.width)) {
        return Err(Error::InvalidArgument(format!(
            "map of {}x{} in an ensemble of {}x{} maps",
            m.height, m.width, first.height, first.width
        )));
    }
    let k = maps.len() as f64;
    let values = (0..first.values.len())
        .map(|i| (maps.iter().map(|m| f64::from(m.values[i])).sum::<f64>() / k) as f32)
        .collect();
    ProbabilityMap::new(first.height, first.width, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_boundary_inclusive() {
        let map = ProbabilityMap::new(2, 2, vec![0.9, 0.4, 0.85, 0.2]).unwrap();
        assert_eq!(threshold(&map, 0.8).data(), &[true, false, true, false]);
        let exact = ProbabilityMap::new(1, 1, vec![0.8]).unwrap();
        assert!(threshold(&exact, 0.8).get(0, 0));
        assert!(threshold(&ProbabilityMap::new(2, 2, vec![0.0; 4]).unwrap(), 0.5).is_empty());
    }

    #[test]
    fn ensemble_mean() {
        let m = ProbabilityMap::new(1, 3, vec![0.1, 0.7, 0.33]).unwrap();
        assert_eq!(ensemble_average(&vec![m.clone(); 6]).unwrap(), m);
        let zeros = ProbabilityMap::new(1, 2, vec![0.0; 2]).unwrap();
        let ones = ProbabilityMap::new(1, 2, vec![1.0; 2]).unwrap();
        let mixed = [zeros.clone(), ones.clone(), zeros.clone(), ones.clone(), zeros, ones];
        assert_eq!(ensemble_average(&mixed).unwrap().values(), &[0.5, 0.5]);
        assert!(ensemble_average(&[]).is_err());
        let other = ProbabilityMap::new(2, 1, vec![0.0; 2]).unwrap();
        assert!(ensemble_average(&[m, other]).is_err());
    }

    #[test]
    fn map_values_validated() {
        assert!(ProbabilityMap::new(1, 2, vec![0.5, 1.5]).is_err());
        assert!(ProbabilityMap::new(1, 2, vec![0.5]).is_err());
        assert!(BinaryMask::new(2, 2, vec![true]).is_err());
    }
}
