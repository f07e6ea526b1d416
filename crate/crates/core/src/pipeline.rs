//! Stage wiring shared by the command-line tool and the tests: preprocess a
//! page, segment it, turn a reviewed manifest into training data, and
//! recognize a page with a trained model.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::features::{extract_features, TrainingSet, FEATURE_LEN};
use crate::imaging::{binarize_otsu, to_grayscale, BinaryImage, GrayImage, RasterImage};
use crate::ocr_model::{predict, OcrModel};
use crate::segmentation::{assign_grid_labels, find_blobs, Blob, BlobManifest, GridConfig};
use crate::text_diff::{order_blobs_into_lines, render_text, RecognizedText};

/// A page after grayscale conversion and Otsu binarization.
#[derive(Debug, Clone)]
pub struct Page {
    pub gray: GrayImage,
    pub binary: BinaryImage,
    pub threshold: u8,
}

impl Page {
    pub fn from_raster(raster: &RasterImage) -> Self {
        Self::from_gray(to_grayscale(raster))
    }

    pub fn from_gray(gray: GrayImage) -> Self {
        let (binary, threshold) = binarize_otsu(&gray);
        Self {
            gray,
            binary,
            threshold,
        }
    }

    pub fn width(&self) -> u32 {
        self.gray.width()
    }

    pub fn height(&self) -> u32 {
        self.gray.height()
    }
}

/// Finds blobs and, for training sheets, labels them from the grid layout.
pub fn segment(page: &Page, min_area: u32, grid: Option<&GridConfig>) -> Result<Vec<Blob>> {
    let blobs = find_blobs(&page.binary, min_area);
    match grid {
        Some(cfg) if !blobs.is_empty() => assign_grid_labels(&blobs, cfg),
        _ => Ok(blobs),
    }
}

/// Feature rows for every blob of a reviewed manifest.
///
/// Every blob must carry a label from `alphabet`; unlabeled blobs are
/// reported together.
pub fn training_set_from_manifest(page: &Page, manifest: &BlobManifest, alphabet: &str) -> Result<TrainingSet> {
    let unlabeled = manifest.unlabeled_ids();
    if !unlabeled.is_empty() {
        return Err(Error::UnlabeledBlob(unlabeled));
    }
    if (manifest.image_w, manifest.image_h) != (page.width(), page.height()) {
        return Err(Error::Schema(format!(
            "manifest is for a {}x{} page but the image is {}x{}",
            manifest.image_w,
            manifest.image_h,
            page.width(),
            page.height()
        )));
    }
    let mut ts = TrainingSet::new(alphabet, FEATURE_LEN);
    for blob in &manifest.blobs {
        let label = blob.label.expect("checked above");
        let class = ts.label_index(label).ok_or_else(|| {
            Error::InvalidArgument(format!("blob {} label {label:?} is not in the alphabet", blob.id))
        })?;
        let fv = extract_features(&page.gray, &page.binary, blob)?;
        ts.push(fv.as_slice(), class)?;
    }
    Ok(ts)
}

#[derive(Debug, Clone)]
pub struct Recognition {
    pub text: RecognizedText,
    /// Detected blobs with their predicted labels filled in.
    pub blobs: Vec<Blob>,
}

/// Segments a page, predicts every blob and assembles the text.
pub fn recognize(page: &Page, model: &OcrModel, min_area: u32, space_factor: f64) -> Result<Recognition> {
    let blobs = find_blobs(&page.binary, min_area);
    let mut predictions = HashMap::with_capacity(blobs.len());
    let mut labeled = Vec::with_capacity(blobs.len());
    for blob in &blobs {
        let fv = extract_features(&page.gray, &page.binary, blob)?;
        let p = predict(model, fv.as_slice())?;
        predictions.insert(blob.id, p.label);
        labeled.push(Blob {
            label: Some(p.label),
            ..blob.clone()
        });
    }
    let lines = order_blobs_into_lines(&blobs);
    let text = render_text(&lines, &predictions, space_factor)?;
    Ok(Recognition {
        text,
        blobs: labeled,
    })
}
