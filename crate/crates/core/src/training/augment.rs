//! Random geometric and contrast augmentation applied per mini-batch.

use rand::Rng;

use crate::error::{Error, Result};
use crate::imageproc::FloatImage;
use crate::postprocess::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Probability of a flip, drawn independently per axis.
    pub flip_prob: f64,
    /// Maximum translation as a fraction of the extent along each axis.
    pub max_shift_frac: f64,
    pub max_rotate_deg: f64,
    /// Scale factor bounds; sampled log-uniformly.
    pub scale_range: (f64, f64),
    pub contrast_gain_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip_prob: 0.5,
            max_shift_frac: 0.1,
            max_rotate_deg: 30.0,
            scale_range: (0.8, 1.25),
            contrast_gain_range: (0.7, 1.3),
        }
    }
}

impl AugmentConfig {
    /// No geometric or photometric change.
    pub fn identity() -> Self {
        AugmentConfig {
            flip_prob: 0.0,
            max_shift_frac: 0.0,
            max_rotate_deg: 0.0,
            scale_range: (1.0, 1.0),
            contrast_gain_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("augmentation: {what}")));
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad("flip_prob must lie in [0, 1]");
        }
        if !(self.max_shift_frac >= 0.0 && self.max_shift_frac.is_finite()) {
            return bad("max_shift_frac must be finite and non-negative");
        }
        if !(self.max_rotate_deg >= 0.0 && self.max_rotate_deg.is_finite()) {
            return bad("max_rotate_deg must be finite and non-negative");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return bad("scale_range must satisfy 0 < lo <= 1 <= hi");
        }
        let (lo, hi) = self.contrast_gain_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad("contrast_gain_range must satisfy 0 <= lo <= hi");
        }
        Ok(())
    }
}

/// One sampled similarity transform plus axis flips, applied about the
/// image centre. Shifts are in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricTransform {
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    pub shift_x: f64,
    pub shift_y: f64,
    pub rotate_deg: f64,
    pub scale: f64,
}

impl GeometricTransform {
    pub fn identity() -> Self {
        GeometricTransform {
            flip_horizontal: false,
            flip_vertical: false,
            shift_x: 0.0,
            shift_y: 0.0,
            rotate_deg: 0.0,
            scale: 1.0,
        }
    }

    /// Draws a transform for an image of `height x width`. The number of
    /// random draws is fixed, whatever the configuration.
    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, height: usize, width: usize, rng: &mut R) -> Self {
        let flip_horizontal = rng.gen::<f64>() < cfg.flip_prob;
        let flip_vertical = rng.gen::<f64>() < cfg.flip_prob;
        let sym = |rng: &mut R, m: f64| (2.0 * rng.gen::<f64>() - 1.0) * m;
        let shift_x = sym(rng, cfg.max_shift_frac * width as f64);
        let shift_y = sym(rng, cfg.max_shift_frac * height as f64);
        let rotate_deg = sym(rng, cfg.max_rotate_deg);
        let (lo, hi) = cfg.scale_range;
        let u: f64 = rng.gen();
        let scale = (lo.ln() + u * (hi.ln() - lo.ln())).exp();
        GeometricTransform {
            flip_horizontal,
            flip_vertical,
            shift_x,
            shift_y,
            rotate_deg,
            scale,
        }
    }

    /// Source coordinate `(x, y)` for output pixel `(qx, qy)`.
    fn source(&self, qx: f64, qy: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (dx, dy) = (qx - cx - self.shift_x, qy - cy - self.shift_y);
        let (s, c) = self.rotate_deg.to_radians().sin_cos();
        // Inverse rotation, then inverse scale.
        let mut rx = (c * dx + s * dy) / self.scale;
        let mut ry = (-s * dx + c * dy) / self.scale;
        if self.flip_horizontal {
            rx = -rx;
        }
        if self.flip_vertical {
            ry = -ry;
        }
        (cx + rx, cy + ry)
    }

    /// Bilinear resampling of every plane; samples outside the image are 0.
    pub fn apply_image(&self, img: &FloatImage) -> FloatImage {
        let (ch, h, w) = (img.channels(), img.height(), img.width());
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let mut out = FloatImage::zeros(ch, h, w);
        let plane_len = h * w;
        for qy in 0..h {
            for qx in 0..w {
                let (sx, sy) = self.source(qx as f64, qy as f64, cx, cy);
                let (x0, y0) = (sx.floor(), sy.floor());
                let (fx, fy) = (sx - x0, sy - y0);
                let taps = [
                    (y0, x0, (1.0 - fy) * (1.0 - fx)),
                    (y0, x0 + 1.0, (1.0 - fy) * fx),
                    (y0 + 1.0, x0, fy * (1.0 - fx)),
                    (y0 + 1.0, x0 + 1.0, fy * fx),
                ];
                let inside = |y: f64, x: f64| y >= 0.0 && x >= 0.0 && y < h as f64 && x < w as f64;
                for c in 0..ch {
                    let mut acc = 0.0f64;
                    for &(ty, tx, wt) in &taps {
                        if wt != 0.0 && inside(ty, tx) {
                            acc += wt * f64::from(img.get(c, ty as usize, tx as usize));
                        }
                    }
                    out.data_mut()[c * plane_len + qy * w + qx] = acc as f32;
                }
            }
        }
        out
    }

    /// Nearest-neighbour resampling; the result stays binary.
    pub fn apply_mask(&self, mask: &BinaryMask) -> BinaryMask {
        let (h, w) = (mask.height(), mask.width());
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        BinaryMask::from_fn(h, w, |qy, qx| {
            let (sx, sy) = self.source(qx as f64, qy as f64, cx, cy);
            let (x, y) = (sx.round(), sy.round());
            x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 && mask.get(y as usize, x as usize)
        })
    }
}

/// Samples one transform and applies it to both the image and its mask.
pub fn augment_geometric<R: Rng + ?Sized>(
    image: &FloatImage,
    mask: &BinaryMask,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> Result<(FloatImage, BinaryMask)> {
    if (image.height(), image.width()) != (mask.height(), mask.width()) {
        return Err(Error::InvalidArgument(format!(
            "image is {}x{} but mask is {}x{}",
            image.height(),
            image.width(),
            mask.height(),
            mask.width()
        )));
    }
    let t = GeometricTransform::sample(cfg, image.height(), image.width(), rng);
    Ok((t.apply_image(image), t.apply_mask(mask)))
}

/// `v <- clamp(mean + gain * (v - mean), 0, 1)` per channel.
pub fn apply_contrast(image: &FloatImage, gains: &[f64]) -> Result<FloatImage> {
    if gains.len() != image.channels() {
        return Err(Error::InvalidArgument(format!(
            "{} gains for {} channels",
            gains.len(),
            image.channels()
        )));
    }
    let mut out = image.clone();
    for (c, &g) in gains.iter().enumerate() {
        let plane = out.plane_mut(c);
        let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / plane.len().max(1) as f64;
        for v in plane.iter_mut() {
            *v = (mean + g * (f64::from(*v) - mean)).clamp(0.0, 1.0) as f32;
        }
    }
    Ok(out)
}

/// Random per-channel contrast gain drawn from `contrast_gain_range`.
pub fn augment_contrast<R: Rng + ?Sized>(image: &FloatImage, rng: &mut R, cfg: &AugmentConfig) -> FloatImage {
    let (lo, hi) = cfg.contrast_gain_range;
    let gains: Vec<f64> = (0..image.channels())
        .map(|_| lo + rng.gen::<f64>() * (hi - lo))
        .collect();
    apply_contrast(image, &gains).expect("one gain per channel")
}
