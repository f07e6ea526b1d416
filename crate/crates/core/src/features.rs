//! Per-blob feature vectors and the three-line-per-sample training file.
//!
//! A feature vector is three 20x20 planes concatenated: the grayscale crop,
//! the binarized crop, and the inverted binarized crop, each area-averaged
//! to 20x20 and scaled to `[0, 1]`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{invert, resize_area_average, BinaryImage, GrayImage};
use crate::segmentation::Blob;

pub const PLANE_SIDE: u32 = 20;
pub const PLANE_LEN: usize = (PLANE_SIDE * PLANE_SIDE) as usize;
pub const FEATURE_LEN: usize = 3 * PLANE_LEN;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_LEN {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_LEN,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("feature value {v} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Normal, binarized, inverted.
    pub fn planes(&self) -> [&[f64]; 3] {
        [
            &self.0[..PLANE_LEN],
            &self.0[PLANE_LEN..2 * PLANE_LEN],
            &self.0[2 * PLANE_LEN..],
        ]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Feature rows with integer class labels indexing into `alphabet`.
///
/// Rows are stored flat (`len() x dim()`). The on-disk format fixes
/// `dim() == FEATURE_LEN`; in memory any positive dimension is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    alphabet: Vec<char>,
    dim: usize,
    values: Vec<f64>,
    labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(alphabet: &str, dim: usize) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        Self {
            alphabet: alphabet.chars().collect(),
            dim,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64], label: usize) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        if label >= self.alphabet.len() {
            return Err(Error::InvalidArgument(format!(
                "label {label} outside alphabet of {} letters",
                self.alphabet.len()
            )));
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn alphabet_string(&self) -> String {
        self.alphabet.iter().collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_index(&self, c: char) -> Option<usize> {
        self.alphabet.iter().position(|&a| a == c)
    }
}

/// Features of one blob on a preprocessed page.
pub fn extract_features(page: &GrayImage, page_bin: &BinaryImage, blob: &Blob) -> Result<FeatureVector> {
    if (page.width(), page.height()) != (page_bin.width(), page_bin.height()) {
        return Err(Error::InvalidArgument(
            "grayscale and binary pages differ in size".into(),
        ));
    }
    let gray = page.crop(blob.x, blob.y, blob.w, blob.h)?;
    let bin = page_bin.crop(blob.x, blob.y, blob.w, blob.h)?;
    let inverted = invert(&bin).to_gray();
    let bin = bin.to_gray();

    let mut values = Vec::with_capacity(FEATURE_LEN);
    for plane in [&gray, &bin, &inverted] {
        let small = resize_area_average(plane, PLANE_SIDE, PLANE_SIDE)?;
        values.extend(small.pixels().iter().map(|&p| p as f64 / 255.0));
    }
    FeatureVector::new(values)
}

/// Writes three lines per sample: 400 values with six fractional digits,
/// then the label, space-separated and `\n`-terminated.
pub fn write_training_file(ts: &TrainingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !ts.is_empty() && ts.dim() != FEATURE_LEN {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_LEN,
            got: ts.dim(),
        });
    }
    let mut out = String::with_capacity(ts.len() * 3 * (PLANE_LEN * 9 + 4));
    for (row, &label) in ts.rows().zip(ts.labels()) {
        for plane in row.chunks_exact(PLANE_LEN) {
            for v in plane {
                write!(out, "{v:.6} ").expect("write to string");
            }
            writeln!(out, "{label}").expect("write to string");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a training file written by [`write_training_file`]; labels index
/// into `alphabet`.
pub fn read_training_file(path: impl AsRef<Path>, alphabet: &str) -> Result<TrainingSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_training_text(&text, alphabet)
}

pub fn parse_training_text(text: &str, alphabet: &str) -> Result<TrainingSet> {
    let mut ts = TrainingSet::new(alphabet, FEATURE_LEN);
    let lines: Vec<&str> = text.lines().collect();
    if !lines.len().is_multiple_of(3) {
        return Err(Error::format(
            lines.len(),
            format!("{} lines is not a multiple of three", lines.len()),
        ));
    }
    let mut row = Vec::with_capacity(FEATURE_LEN);
    for (sample, triple) in lines.chunks_exact(3).enumerate() {
        row.clear();
        let mut sample_label = None;
        for (offset, line) in triple.iter().enumerate() {
            let line_no = sample * 3 + offset + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != PLANE_LEN + 1 {
                return Err(Error::format(
                    line_no,
                    format!("expected {} tokens, found {}", PLANE_LEN + 1, tokens.len()),
                ));
            }
            let label: usize = tokens[PLANE_LEN]
                .parse()
                .map_err(|_| Error::format(line_no, format!("bad label {:?}", tokens[PLANE_LEN])))?;
            match sample_label {
                None => sample_label = Some(label),
                Some(l) if l != label => {
                    return Err(Error::format(
                        line_no,
                        format!("label {label} disagrees with {l} earlier in the sample"),
                    ))
                }
                Some(_) => {}
            }
            for tok in &tokens[..PLANE_LEN] {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::format(line_no, format!("non-numeric value {tok:?}")))?;
                row.push(v);
            }
        }
        let label = sample_label.expect("three lines read");
        ts.push(&row, label)
            .map_err(|e| Error::format(sample * 3 + 1, e.to_string()))?;
    }
    Ok(ts)
}
