//! Character blobs: connected-component detection, training-grid labeling,
//! and the JSON manifest that carries blob state between segmentation,
//! human review, and feature export.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BinaryImage;

/// Default minimum component size; smaller components are treated as scanner noise.
pub const DEFAULT_MIN_AREA: u32 = 15;

const KMEANS_ITERATIONS: usize = 50;

/// Bounding box of one hypothesized character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub id: u32,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub label: Option<char>,
}

impl Blob {
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    fn center(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x as f64 + self.w as f64 / 2.0,
            Axis::Y => self.y as f64 + self.h as f64 / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobManifest {
    pub image_path: String,
    pub image_w: u32,
    pub image_h: u32,
    pub blobs: Vec<Blob>,
}

impl BlobManifest {
    pub fn new(image_path: impl Into<String>, image_w: u32, image_h: u32, blobs: Vec<Blob>) -> Self {
        Self {
            image_path: image_path.into(),
            image_w,
            image_h,
            blobs,
        }
    }

    pub fn blob(&self, id: u32) -> Option<&Blob> {
        self.blobs.iter().find(|b| b.id == id)
    }

    /// Checks page dimensions, blob boxes and id uniqueness.
    ///
    /// Errors are [`Error::Schema`] with a field path, e.g.
    /// `blobs[3]: box (95,10,10,10) exceeds the 100x100 page`.
    pub fn validate(&self) -> Result<()> {
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::Schema(format!(
                "image_w/image_h: page must be at least 1x1, got {}x{}",
                self.image_w, self.image_h
            )));
        }
        let mut seen = HashSet::new();
        for (i, b) in self.blobs.iter().enumerate() {
            if !seen.insert(b.id) {
                return Err(Error::Schema(format!("blobs[{i}].id: duplicate id {}", b.id)));
            }
            if b.w == 0 || b.h == 0 {
                return Err(Error::Schema(format!(
                    "blobs[{i}]: width and height must be >= 1, got {}x{}",
                    b.w, b.h
                )));
            }
            if !fits(b.x, b.y, b.w, b.h, self.image_w, self.image_h) {
                return Err(Error::Schema(format!(
                    "blobs[{i}]: box ({},{},{},{}) exceeds the {}x{} page",
                    b.x, b.y, b.w, b.h, self.image_w, self.image_h
                )));
            }
        }
        Ok(())
    }

    pub fn unlabeled_ids(&self) -> Vec<u32> {
        self.blobs
            .iter()
            .filter(|b| b.label.is_none())
            .map(|b| b.id)
            .collect()
    }

    /// Parses and validates manifest JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: BlobManifest =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Canonical serialization: pretty-printed, trailing newline.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}

fn fits(x: u32, y: u32, w: u32, h: u32, width: u32, height: u32) -> bool {
    x as u64 + w as u64 <= width as u64 && y as u64 + h as u64 <= height as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Each column holds one letter; rows are repeated samples.
    #[default]
    LettersAlongColumns,
    /// Each row holds one letter; columns are repeated samples.
    LettersAlongRows,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n_letters: usize,
    pub n_samples: usize,
    pub orientation: Orientation,
    pub alphabet: String,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_letters: 26,
            n_samples: 12,
            orientation: Orientation::default(),
            alphabet: "ABCDEFGHIJKLMNOPQRSTUVWXYZ".to_string(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let len = self.alphabet.chars().count();
        if len != self.n_letters {
            return Err(Error::InvalidArgument(format!(
                "alphabet has {len} characters but n_letters is {}",
                self.n_letters
            )));
        }
        if self.n_letters == 0 || self.n_samples == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one letter and one sample".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// One blob per 8-connected ink component of at least `min_area` pixels.
///
/// Blobs are ordered by the `(y, x)` of their top-left corner and numbered
/// `0..n` in that order. Components sharing a corner fall back to the scan
/// position of their first pixel.
pub fn find_blobs(img: &BinaryImage, min_area: u32) -> Vec<Blob> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let ink = img.pixels();
    let mut visited = vec![false; ink.len()];
    let mut stack = Vec::new();
    // (y, x, first-pixel index, w, h)
    let mut found: Vec<(u32, u32, usize, u32, u32)> = Vec::new();

    for start in 0..ink.len() {
        if ink[start] == 0 || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (w, h, 0, 0);
        let mut area: u64 = 0;
        while let Some(idx) = stack.pop() {
            let (px, py) = (idx % w, idx / w);
            area += 1;
            min_x = min_x.min(px);
            max_x = max_x.max(px);
            min_y = min_y.min(py);
            max_y = max_y.max(py);
            for ny in py.saturating_sub(1)..=(py + 1).min(h - 1) {
                for nx in px.saturating_sub(1)..=(px + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if ink[n] == 1 && !visited[n] {
                        visited[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if area >= min_area as u64 {
            found.push((
                min_y as u32,
                min_x as u32,
                start,
                (max_x - min_x + 1) as u32,
                (max_y - min_y + 1) as u32,
            ));
        }
    }

    found.sort_unstable();
    found
        .into_iter()
        .enumerate()
        .map(|(id, (y, x, _, bw, bh))| Blob {
            id: id as u32,
            x,
            y,
            w: bw,
            h: bh,
            label: None,
        })
        .collect()
}

/// Labels blobs on a training sheet by clustering box centers into
/// `n_letters` bands along the letter axis.
///
/// 1-D k-means with centers initialized evenly between the extreme blob
/// centers; the i-th band by coordinate receives `alphabet[i]`. Fails with
/// [`Error::GridMismatch`] unless every band ends up non-empty.
pub fn assign_grid_labels(blobs: &[Blob], cfg: &GridConfig) -> Result<Vec<Blob>> {
    cfg.validate()?;
    if blobs.len() > cfg.n_letters * cfg.n_samples {
        log::warn!(
            "{} blobs exceed the {}x{} grid; extra blobs will be labeled by nearest band",
            blobs.len(),
            cfg.n_letters,
            cfg.n_samples
        );
    }
    let axis = match cfg.orientation {
        Orientation::LettersAlongColumns => Axis::X,
        Orientation::LettersAlongRows => Axis::Y,
    };
    let points: Vec<f64> = blobs.iter().map(|b| b.center(axis)).collect();
    let (assignment, centers) = kmeans_1d(&points, cfg.n_letters);

    let mut sizes = vec![0usize; cfg.n_letters];
    for &c in &assignment {
        sizes[c] += 1;
    }
    let found = sizes.iter().filter(|&&s| s > 0).count();
    if found != cfg.n_letters {
        return Err(Error::GridMismatch {
            expected: cfg.n_letters,
            found,
        });
    }

    let mut order: Vec<usize> = (0..cfg.n_letters).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; cfg.n_letters];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let alphabet: Vec<char> = cfg.alphabet.chars().collect();

    Ok(blobs
        .iter()
        .zip(&assignment)
        .map(|(b, &c)| Blob {
            label: Some(alphabet[rank[c]]),
            ..b.clone()
        })
        .collect())
}

fn kmeans_1d(points: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    if points.is_empty() {
        return (Vec::new(), vec![0.0; k]);
    }
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut centers: Vec<f64> = if k == 1 {
        vec![(lo + hi) / 2.0]
    } else {
        (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect()
    };
    let mut assignment = vec![0usize; points.len()];

    for _ in 0..KMEANS_ITERATIONS {
        for (a, &p) in assignment.iter_mut().zip(points) {
            *a = nearest(&centers, p);
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&a, &p) in assignment.iter().zip(points) {
            sums[a] += p;
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
    }
    for (a, &p) in assignment.iter_mut().zip(points) {
        *a = nearest(&centers, p);
    }
    (assignment, centers)
}

// Ties go to the lower index.
fn nearest(centers: &[f64], p: f64) -> usize {
    let mut best = 0;
    for (i, c) in centers.iter().enumerate().skip(1) {
        if (c - p).abs() < (centers[best] - p).abs() {
            best = i;
        }
    }
    best
}

/// Writes the manifest atomically (temp file in the same directory, then rename).
pub fn save_manifest(m: &BlobManifest, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), m.to_json().as_bytes())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<BlobManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BlobManifest::from_json(&text)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// A single human correction to a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BlobEdit {
    /// Move/resize a blob; `label: Some(..)` also replaces its label.
    Update {
        id: u32,
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<Option<char>>,
    },
    Delete { id: u32 },
    Create {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        label: Option<char>,
    },
}

/// Applies one edit and returns the updated manifest; other blobs are untouched.
pub fn apply_blob_edit(m: &BlobManifest, edit: &BlobEdit) -> Result<BlobManifest> {
    let check_box = |x: u32, y: u32, w: u32, h: u32| {
        if w >= 1 && h >= 1 && fits(x, y, w, h, m.image_w, m.image_h) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x,
                y,
                w,
                h,
                width: m.image_w,
                height: m.image_h,
            })
        }
    };
    let mut out = m.clone();
    match *edit {
        BlobEdit::Update {
            id,
            x,
            y,
            w,
            h,
            label,
        } => {
            let blob = out
                .blobs
                .iter_mut()
                .find(|b| b.id == id)
                .ok_or(Error::UnknownBlobId(id))?;
            check_box(x, y, w, h)?;
            blob.x = x;
            blob.y = y;
            blob.w = w;
            blob.h = h;
            if let Some(label) = label {
                blob.label = label;
            }
        }
        BlobEdit::Delete { id } => {
            let pos = out
                .blobs
                .iter()
                .position(|b| b.id == id)
                .ok_or(Error::UnknownBlobId(id))?;
            out.blobs.remove(pos);
        }
        BlobEdit::Create { x, y, w, h, label } => {
            check_box(x, y, w, h)?;
            let used: HashSet<u32> = out.blobs.iter().map(|b| b.id).collect();
            let id = (0..).find(|i| !used.contains(i)).expect("free id exists");
            out.blobs.push(Blob {
                id,
                x,
                y,
                w,
                h,
                label,
            });
        }
    }
    Ok(out)
}
