//! sRGB to HSV (hexcone) and to CIELAB lightness (D65).

use super::FloatImage;

/// HSV of one RGB triple in `[0, 1]`. Hue is degrees / 360; achromatic
/// pixels get hue and saturation 0.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta <= 0.0 {
        return (0.0, 0.0, max);
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let h = sector / 6.0;
    (if h >= 1.0 { 0.0 } else { h }, delta / max, max)
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// CIELAB L* of one sRGB triple, divided by 100 and clamped to `[0, 1]`.
pub fn lab_lightness(r: f64, g: f64, b: f64) -> f64 {
    // Relative luminance against the D65 white (Yn = 1).
    let y = 0.2126 * srgb_to_linear(r) + 0.7152 * srgb_to_linear(g) + 0.0722 * srgb_to_linear(b);
    const DELTA: f64 = 6.0 / 29.0;
    let f = if y > DELTA * DELTA * DELTA {
        y.cbrt()
    } else {
        y / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    };
    ((116.0 * f - 16.0) / 100.0).clamp(0.0, 1.0)
}

fn per_pixel<const N: usize>(rgb: &FloatImage, f: impl Fn(f64, f64, f64) -> [f64; N]) -> FloatImage {
    let (h, w) = (rgb.height(), rgb.width());
    let mut out = FloatImage::zeros(N, h, w);
    let plane = h * w;
    let (r, g, b) = (rgb.plane(0), rgb.plane(1), rgb.plane(2));
    let data = out.data_mut();
    for i in 0..plane {
        let vals = f(f64::from(r[i]), f64::from(g[i]), f64::from(b[i]));
        for (c, v) in vals.into_iter().enumerate() {
            data[c * plane + i] = v as f32;
        }
    }
    out
}

/// H, S and V planes of a three-plane RGB image.
pub fn rgb_to_hsv_planes(rgb: &FloatImage) -> FloatImage {
    assert_eq!(rgb.channels(), 3, "expected RGB planes");
    per_pixel(rgb, |r, g, b| {
        let (h, s, v) = rgb_to_hsv(r, g, b);
        [h, s, v]
    })
}

/// CIELAB L plane (scaled to `[0, 1]`) of a three-plane sRGB image.
pub fn rgb_to_lab_l(rgb: &FloatImage) -> FloatImage {
    assert_eq!(rgb.channels(), 3, "expected RGB planes");
    per_pixel(rgb, |r, g, b| [lab_lightness(r, g, b)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primary_and_gray_hsv() {
        assert_eq!(rgb_to_hsv(1.0, 0.0, 0.0), (0.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(0.5, 0.5, 0.5), (0.0, 0.0, 0.5));
        let (h, s, v) = rgb_to_hsv(0.0, 1.0, 0.0);
        assert!((h - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((s, v), (1.0, 1.0));
        let (h, _, _) = rgb_to_hsv(0.0, 0.0, 1.0);
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        // Magenta sits at 300 degrees.
        let (h, _, _) = rgb_to_hsv(1.0, 0.0, 1.0);
        assert!((h - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn lightness_reference_points() {
        assert_eq!(lab_lightness(1.0, 1.0, 1.0), 1.0);
        assert_eq!(lab_lightness(0.0, 0.0, 0.0), 0.0);
        // Reference: L*(sRGB 0.5 gray) = 53.389, L*(red) = 53.2329.
        assert!((lab_lightness(0.5, 0.5, 0.5) - 0.53389).abs() < 1e-4);
        assert!((lab_lightness(1.0, 0.0, 0.0) - 0.532329).abs() < 1e-5);
    }
}
