//! Ensemble inference over image files and evaluation against a manifest.

use std::borrow::Borrow;
use std::path::{Path, PathBuf};

use super::dataset::Dataset;
use super::metrics::{jaccard_index, Report};
use crate::error::{Error, Result};
use crate::imageproc::{pnm, preprocess_to, resize_bilinear, FloatImage, RawImage};
use crate::network::Network;
use crate::postprocess::{dual_threshold_segment, ensemble_average, BinaryMask, ProbabilityMap, TH_HIGH, TH_LOW};
use crate::tensor::Tensor;

/// Mean probability map of the ensemble at the image's own resolution.
/// The networks see the image resized to `height x width`; the averaged
/// map is resized back with the same bilinear sampling.
pub fn predict_probability<N: Borrow<Network>>(
    networks: &[N],
    raw: &RawImage,
    height: usize,
    width: usize,
) -> Result<ProbabilityMap> {
    if networks.is_empty() {
        return Err(Error::InvalidArgument("no networks to predict with".into()));
    }
    let input = preprocess_to(raw, height, width)?;
    let x = Tensor::from_vec([1, input.channels(), height, width], input.into_data())?;
    let maps = networks
        .iter()
        .map(|net| ProbabilityMap::from_tensor(&net.borrow().infer(&x)?, 0))
        .collect::<Result<Vec<_>>>()?;
    let mean = ensemble_average(&maps)?;
    if (raw.height(), raw.width()) == (height, width) {
        return Ok(mean);
    }
    let plane = FloatImage::new(1, height, width, mean.values().to_vec())?;
    let full = resize_bilinear(&plane, raw.height(), raw.width());
    ProbabilityMap::new(raw.height(), raw.width(), full.into_data())
}

/// Final mask for one image.
pub fn predict_mask<N: Borrow<Network>>(
    networks: &[N],
    raw: &RawImage,
    height: usize,
    width: usize,
) -> Result<BinaryMask> {
    Ok(dual_threshold_segment(
        &predict_probability(networks, raw, height, width)?,
        TH_HIGH,
        TH_LOW,
    ))
}

#[derive(Debug, Default)]
pub struct PredictSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, Error)>,
}

/// Mask path for an image: `<out_dir>/<image stem>.pgm`.
pub fn mask_path(out_dir: &Path, image: &Path) -> PathBuf {
    let stem = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out_dir.join(format!("{stem}.pgm"))
}

/// Predicts every image; a failing image is recorded and skipped.
pub fn predict_files(
    networks: &[Network],
    images: &[PathBuf],
    out_dir: &Path,
    height: usize,
    width: usize,
    write_probability_maps: bool,
) -> PredictSummary {
    let mut summary = PredictSummary::default();
    for image in images {
        let result = (|| -> Result<PathBuf> {
            let raw = pnm::read_ppm(image)?;
            let map = predict_probability(networks, &raw, height, width)?;
            let out = mask_path(out_dir, image);
            pnm::write_mask(&out, &dual_threshold_segment(&map, TH_HIGH, TH_LOW))?;
            if write_probability_maps {
                pnm::write_probability_map(out.with_extension("prob.pgm"), &map)?;
            }
            Ok(out)
        })();
        match result {
            Ok(p) => summary.written.push(p),
            Err(e) => summary.failures.push((image.clone(), e)),
        }
    }
    summary
}

/// Scores the predictions in `pred_dir` against the truth masks of
/// `dataset`. Every missing prediction is named in the error.
pub fn evaluate(pred_dir: &Path, dataset: &Dataset) -> Result<Report> {
    let missing: Vec<String> = dataset
        .records
        .iter()
        .filter(|r| !mask_path(pred_dir, &r.image).is_file())
        .map(|r| r.name())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "missing predictions: {}",
            missing.join(", ")
        )));
    }
    let mut report = Report::default();
    for r in &dataset.records {
        let truth = pnm::read_mask(&r.mask)?;
        let pred = pnm::read_mask(mask_path(pred_dir, &r.image))?;
        report.push(r.name(), jaccard_index(&pred, &truth)?);
    }
    Ok(report)
}
