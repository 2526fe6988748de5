//! Netpbm input and output: RGB images as PPM (P6), masks as 8-bit PGM
//! (P5, {0, 255}) and probability maps as 16-bit PGM (P5, maxval 65535).

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use super::RawImage;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::postprocess::{BinaryMask, ProbabilityMap};

fn decode(bytes: &[u8], origin: &Path) -> Result<DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Pnm).map_err(|e| Error::Image {
        path: origin.to_path_buf(),
        detail: e.to_string(),
    })
}

fn read(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

fn encode(subtype: PnmSubtype, data: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(subtype)
        .write_image(data, w as u32, h as u32, color)
        .map_err(|e| Error::Image {
            path: "<memory>".into(),
            detail: e.to_string(),
        })?;
    Ok(buf)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RawImage> {
    let img = decode(bytes, Path::new("<memory>"))?.into_rgb8();
    RawImage::new(img.width() as usize, img.height() as usize, img.into_raw())
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RawImage> {
    let img = read(path.as_ref())?.into_rgb8();
    RawImage::new(img.width() as usize, img.height() as usize, img.into_raw())
}

pub fn encode_ppm(img: &RawImage) -> Result<Vec<u8>> {
    encode(
        PnmSubtype::Pixmap(SampleEncoding::Binary),
        img.pixels(),
        img.width(),
        img.height(),
        ExtendedColorType::Rgb8,
    )
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RawImage) -> Result<()> {
    write_atomic(path.as_ref(), &encode_ppm(img)?)
}

/// Reads a grayscale mask; samples above half the maximum are foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = read(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| v > 32767).collect(),
        other => other.into_luma8().into_raw().into_iter().map(|v| v > 127).collect(),
    };
    BinaryMask::new(h, w, data)
}

pub fn encode_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(
        PnmSubtype::Graymap(SampleEncoding::Binary),
        &data,
        mask.width(),
        mask.height(),
        ExtendedColorType::L8,
    )
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_atomic(path.as_ref(), &encode_mask(mask)?)
}

/// Quantizes to `round(p * 65535)`. Written directly because the PNM encoder
/// in `image` has no 16-bit grayscale path; samples are big-endian.
pub fn encode_probability_map(map: &ProbabilityMap) -> Result<Vec<u8>> {
    let mut buf = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    buf.extend(
        map.values()
            .iter()
            .flat_map(|&p| ((f64::from(p).clamp(0.0, 1.0) * 65535.0).round() as u16).to_be_bytes()),
    );
    Ok(buf)
}

pub fn write_probability_map(path: impl AsRef<Path>, map: &ProbabilityMap) -> Result<()> {
    write_atomic(path.as_ref(), &encode_probability_map(map)?)
}

pub fn read_probability_map(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let img = read(path.as_ref())?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    ProbabilityMap::new(
        h,
        w,
        img.into_raw().into_iter().map(|v| f32::from(v) / 65535.0).collect(),
    )
}
