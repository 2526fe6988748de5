//! Manifests of `image.ppm,mask.pgm` pairs and loading them as training
//! samples.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::imageproc::{pnm, preprocess_to};
use crate::postprocess::BinaryMask;
use crate::training::TrainSample;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub image: PathBuf,
    pub mask: PathBuf,
}

impl Record {
    /// File stem of the image, used to name predictions and report rows.
    pub fn name(&self) -> String {
        self.image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    /// Parses manifest text. Blank lines and `#` comments are skipped;
    /// relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (image, mask) = line
                .split_once(',')
                .filter(|(a, b)| !a.trim().is_empty() && !b.trim().is_empty() && !b.contains(','))
                .ok_or_else(|| Error::Config(format!("manifest line {}: expected `image,mask`", no + 1)))?;
            records.push(Record {
                image: base.join(image.trim()),
                mask: base.join(mask.trim()),
            });
        }
        Ok(Dataset { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Manifest text with paths relative to `base` where possible.
    pub fn to_manifest(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        self.records
            .iter()
            .map(|r| format!("{},{}\n", rel(&r.image), rel(&r.mask)))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_atomic(
            path,
            self.to_manifest(path.parent().unwrap_or(Path::new(""))).as_bytes(),
        )
    }

    /// Confirms every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        for r in &self.records {
            for p in [&r.image, &r.mask] {
                if !p.is_file() {
                    return Err(Error::Config(format!(
                        "manifest references missing file {}",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads and preprocesses every pair at `height x width`.
    pub fn load_samples(&self, height: usize, width: usize) -> Result<Vec<TrainSample>> {
        self.records
            .iter()
            .map(|r| {
                let image = preprocess_to(&pnm::read_ppm(&r.image)?, height, width)?;
                let mask = resize_mask_nearest(&pnm::read_mask(&r.mask)?, height, width);
                TrainSample::new(image, mask)
            })
            .collect()
    }
}

/// Nearest-neighbour resize with half-pixel-centre alignment.
pub fn resize_mask_nearest(mask: &BinaryMask, height: usize, width: usize) -> BinaryMask {
    if (mask.height(), mask.width()) == (height, width) {
        return mask.clone();
    }
    let pick =
        |dst: usize, out: usize, len: usize| ((((dst as f64 + 0.5) * len as f64) / out as f64) as usize).min(len - 1);
    BinaryMask::from_fn(height, width, |y, x| {
        mask.get(pick(y, height, mask.height()), pick(x, width, mask.width()))
    })
}
