//! Image containers, colour-space expansion, resizing and netpbm I/O.

mod color;
pub mod pnm;
mod resize;

pub use color::{lab_lightness, rgb_to_hsv, rgb_to_hsv_planes, rgb_to_lab_l};
pub use resize::resize_bilinear;

use crate::error::{Error, Result};

/// Model input height for real images.
pub const INPUT_HEIGHT: usize = 192;
/// Model input width for real images.
pub const INPUT_WIDTH: usize = 256;

/// Plane order of a preprocessed input.
pub const PLANE_NAMES: [&str; 7] = ["R", "G", "B", "H", "S", "V", "L"];

/// 8-bit interleaved RGB pixels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height).and_then(|n| n.checked_mul(3)) != Some(pixels.len()) {
            return Err(Error::InvalidArgument(format!(
                "{} bytes do not hold a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(RawImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// RGB rescaled from `0..=255` to `[0, 1]`.
    pub fn to_float(&self) -> FloatImage {
        let plane = self.width * self.height;
        let mut data = vec![0.0f32; plane * 3];
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = f32::from(px[c]) / 255.0;
            }
        }
        FloatImage {
            channels: 3,
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// Planar real-valued image: `channels` planes of `height x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FloatImage {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels * height * width != data.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(FloatImage {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FloatImage {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        FloatImage {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Stacks planes of equal extent into one image.
    pub fn stack(parts: &[&FloatImage]) -> Result<FloatImage> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if (p.height, p.width) != (h, w) {
                return Err(Error::InvalidArgument(format!(
                    "cannot stack {}x{} with {h}x{w}",
                    p.height, p.width
                )));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Ok(FloatImage {
            channels,
            height: h,
            width: w,
            data,
        })
    }
}

/// Full preprocessing at the standard 192x256 model resolution.
pub fn preprocess(raw: &RawImage) -> Result<FloatImage> {
    preprocess_to(raw, INPUT_HEIGHT, INPUT_WIDTH)
}

/// Rescales RGB to `[0, 1]`, derives H, S, V and CIELAB L at full
/// resolution, then resizes all seven planes to `height x width`.
pub fn preprocess_to(raw: &RawImage, height: usize, width: usize) -> Result<FloatImage> {
    if raw.width == 0 || raw.height == 0 {
        return Err(Error::InvalidArgument("image has zero extent".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument("target size has zero extent".into()));
    }
    let rgb = raw.to_float();
    let hsv = rgb_to_hsv_planes(&rgb);
    let l = rgb_to_lab_l(&rgb);
    let full = FloatImage::stack(&[&rgb, &hsv, &l])?;
    Ok(resize_bilinear(&full, height, width))
}
