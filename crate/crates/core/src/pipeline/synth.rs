//! Synthetic dermoscopy-like images: a darker elliptical lesion on noisy
//! skin, with optional hair strokes and vignetting.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{Dataset, Record};
use crate::error::Result;
use crate::imageproc::{pnm, RawImage};
use crate::postprocess::BinaryMask;
use crate::training::trainer::stream;

/// Default synthetic extent (3:4, a quarter of the standard pixel count).
pub const SYNTH_HEIGHT: usize = 96;
pub const SYNTH_WIDTH: usize = 128;

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    cy: f64,
    cx: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    /// Normalized squared radius; the lesion is `r2 <= 1`.
    fn r2(&self, y: f64, x: f64) -> f64 {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }
}

/// Sample `index` of the stream for `seed`; independent of every other index.
pub fn synthetic_sample(height: usize, width: usize, seed: u64, index: usize) -> (RawImage, BinaryMask) {
    let mut rng = stream(seed, index as u64 + 1);
    let (hf, wf) = (height as f64, width as f64);
    let minor = hf.min(wf);

    let skin = [
        rng.gen_range(0.72..0.95),
        rng.gen_range(0.52..0.75),
        rng.gen_range(0.42..0.65),
    ];
    let darken: f64 = rng.gen_range(0.35..0.65);
    let core: f64 = rng.gen_range(0.5..0.85);
    let tint = [
        rng.gen_range(0.55..0.75),
        rng.gen_range(0.4..0.6),
        rng.gen_range(0.3..0.5),
    ];
    let a = rng.gen_range(0.12..0.30) * minor * 1.2;
    let b = a * rng.gen_range(0.55..1.0);
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let lesion = Ellipse {
        cy: hf * rng.gen_range(0.35..0.65),
        cx: wf * rng.gen_range(0.35..0.65),
        a,
        b,
        cos: theta.cos(),
        sin: theta.sin(),
    };
    // Low-frequency skin shading.
    let (fy, fx, phase, shade) = (
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.5..2.0),
        rng.gen_range(0.0..6.3),
        rng.gen_range(0.0..0.06),
    );
    let vignette = if rng.gen_bool(0.5) {
        rng.gen_range(0.1..0.4)
    } else {
        0.0
    };
    let hairs = if rng.gen_bool(0.5) { rng.gen_range(1..=4) } else { 0 };
    let strokes: Vec<[f64; 5]> = (0..hairs)
        .map(|_| {
            [
                rng.gen_range(0.0..hf),
                rng.gen_range(0.0..wf),
                rng.gen_range(0.0..hf),
                rng.gen_range(0.0..wf),
                rng.gen_range(0.05..0.25),
            ]
        })
        .collect();
    let noise = Normal::new(0.0, 0.025).expect("valid deviation");

    let mut mask = BinaryMask::empty(height, width);
    let mut pixels = Vec::with_capacity(height * width * 3);
    let (cy, cx) = ((hf - 1.0) / 2.0, (wf - 1.0) / 2.0);
    let rmax2 = cy * cy + cx * cx;
    for y in 0..height {
        for x in 0..width {
            let (yf, xf) = (y as f64, x as f64);
            let s = 1.0 + shade * ((fy * yf / hf + fx * xf / wf) * std::f64::consts::TAU + phase).sin();
            let mut rgb = skin.map(|c| c * s);
            let r2 = lesion.r2(yf, xf);
            if r2 <= 1.0 {
                mask.set(y, x, true);
                // Darker towards the centre.
                let depth = darken * (1.0 - core * (1.0 - r2) * 0.6);
                for c in 0..3 {
                    rgb[c] *= depth * (0.6 + 0.4 * tint[c] / tint[0]);
                }
            }
            for &[y0, x0, y1, x1, tone] in &strokes {
                if distance_to_segment(yf, xf, y0, x0, y1, x1) < 0.7 {
                    rgb = [tone, tone * 0.8, tone * 0.7];
                }
            }
            let v = 1.0 - vignette * ((yf - cy).powi(2) + (xf - cx).powi(2)) / rmax2;
            for c in rgb {
                let value = (c * v + noise.sample(&mut rng)).clamp(0.0, 1.0);
                pixels.push((value * 255.0).round() as u8);
            }
        }
    }
    if mask.is_empty() {
        let (y, x) = (lesion.cy as usize, lesion.cx as usize);
        mask.set(y.min(height - 1), x.min(width - 1), true);
    }
    (
        RawImage::new(width, height, pixels).expect("buffer matches extent"),
        mask,
    )
}

fn distance_to_segment(y: f64, x: f64, y0: f64, x0: f64, y1: f64, x1: f64) -> f64 {
    let (dy, dx) = (y1 - y0, x1 - x0);
    let len2 = dy * dy + dx * dx;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((y - y0) * dy + (x - x0) * dx) / len2).clamp(0.0, 1.0)
    };
    (y - y0 - t * dy).hypot(x - x0 - t * dx)
}

/// `n` image/mask pairs, deterministic for a seed.
pub fn generate_synthetic(n: usize, height: usize, width: usize, seed: u64) -> Vec<(RawImage, BinaryMask)> {
    (0..n).map(|i| synthetic_sample(height, width, seed, i)).collect()
}

/// Writes `synth_NNNN.ppm` / `synth_NNNN_mask.pgm` pairs and
/// `manifest.txt` into `dir`, returning the manifest path.
pub fn write_synthetic(dir: &Path, n: usize, height: usize, width: usize, seed: u64) -> Result<PathBuf> {
    super::config::prepare_output_dir(dir)?;
    let mut dataset = Dataset::default();
    for (i, (img, mask)) in generate_synthetic(n, height, width, seed).into_iter().enumerate() {
        let image = dir.join(format!("synth_{i:04}.ppm"));
        let mask_path = dir.join(format!("synth_{i:04}_mask.pgm"));
        pnm::write_ppm(&image, &img)?;
        pnm::write_mask(&mask_path, &mask)?;
        dataset.records.push(Record { image, mask: mask_path });
    }
    let manifest = dir.join("manifest.txt");
    dataset.save(&manifest)?;
    Ok(manifest)
}
