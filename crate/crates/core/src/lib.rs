//! Document digitization: page preprocessing, character segmentation and
//! recognition, OCR scoring with Myers diff, and Naive Bayes classification
//! of the recovered text.

pub mod error;
pub mod features;
pub mod imaging;
pub mod ocr_model;
pub mod pipeline;
pub mod segmentation;
pub mod synth;
pub mod text_diff;
pub mod textclass;

pub use error::{Error, Result};
pub use features::{FeatureVector, TrainingSet, FEATURE_LEN};
pub use imaging::{BinaryImage, GrayImage, RasterImage};
pub use ocr_model::{Hyperparams, ModelKind, OcrModel, Prediction};
pub use pipeline::Page;
pub use segmentation::{Blob, BlobEdit, BlobManifest, GridConfig, Orientation};
pub use text_diff::{DiffReport, Edit, RecognizedText};
pub use textclass::{Document, FeatureMode, NbModel, TextPipeline};
