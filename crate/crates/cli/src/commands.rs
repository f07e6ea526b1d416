//! One function per subcommand. Each takes paths and a config, writes its
//! output files and returns a summary for the caller to print.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use scanclass::features::{read_training_file, write_training_file};
use scanclass::imaging::load_image;
use scanclass::ocr_model::{evaluate_ocr, load_model, save_model, train_centroid, train_logreg};
use scanclass::pipeline::{recognize, segment, training_set_from_manifest};
use scanclass::segmentation::{load_manifest, save_manifest};
use scanclass::synth::{render_text_page, render_training_sheet, wrap_words, write_png, RenderStyle, SAMPLE_TEXT};
use scanclass::text_diff::compare_texts;
use scanclass::textclass::{
    classify_text, evaluate_nb, load_class_corpus, load_corpus, load_corpus_dir, load_nb_model, save_corpus,
    save_nb_model, split_corpus, train_nb, NbEvaluation,
};
use scanclass::{BlobManifest, DiffReport, Document, Error, FeatureMode, ModelKind, Page, TextPipeline};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;

pub type CmdResult<T> = Result<T, CliError>;

/// Where `segment` writes the manifest of an image: same directory, same
/// stem, `.json` extension.
pub fn manifest_path_for(image: &Path) -> PathBuf {
    image.with_extension("json")
}

fn load_page(path: &Path) -> CmdResult<Page> {
    Ok(Page::from_raster(&load_image(path)?))
}

/// Image path as recorded in a manifest: relative to the manifest when they
/// share a directory.
fn recorded_image_path(image: &Path, manifest: &Path) -> String {
    let same_dir = image.parent().unwrap_or(Path::new("")) == manifest.parent().unwrap_or(Path::new(""));
    match image.file_name() {
        Some(name) if same_dir => name.to_string_lossy().into_owned(),
        _ => image.to_string_lossy().into_owned(),
    }
}

fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let mut json = serde_json::to_string_pretty(value).expect("report serializes");
    json.push('\n');
    write_text(path, &json)
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads a text file, dropping one trailing line break.
pub fn read_text(path: &Path) -> CmdResult<String> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Core(Error::FileNotFound(path.to_path_buf()))
        } else {
            io_error(path, e)
        }
    })?;
    let trimmed = text
        .strip_suffix("\r\n")
        .or_else(|| text.strip_suffix('\n'))
        .unwrap_or(&text);
    Ok(trimmed.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary {
    pub manifest_path: PathBuf,
    pub blob_count: usize,
    pub labeled: usize,
    pub threshold: u8,
    pub warnings: Vec<String>,
}

impl fmt::Display for SegmentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} blobs ({} labeled, threshold {}) -> {}",
            self.blob_count,
            self.labeled,
            self.threshold,
            self.manifest_path.display()
        )
    }
}

pub fn cmd_segment(image: &Path, cfg: &PipelineConfig, grid: bool, out: Option<&Path>) -> CmdResult<SegmentSummary> {
    let page = load_page(image)?;
    let blobs = segment(&page, cfg.min_area, grid.then_some(&cfg.grid))?;
    let manifest_path = out.map_or_else(|| manifest_path_for(image), Path::to_path_buf);
    let manifest = BlobManifest::new(
        recorded_image_path(image, &manifest_path),
        page.width(),
        page.height(),
        blobs,
    );
    save_manifest(&manifest, &manifest_path)?;

    let mut warnings = Vec::new();
    if manifest.blobs.is_empty() {
        warnings.push(format!("no blobs found in {}", image.display()));
    } else if grid && manifest.blobs.len() != cfg.grid.n_letters * cfg.grid.n_samples {
        warnings.push(format!(
            "grid expects {} blobs, found {}",
            cfg.grid.n_letters * cfg.grid.n_samples,
            manifest.blobs.len()
        ));
    }
    Ok(SegmentSummary {
        manifest_path,
        blob_count: manifest.blobs.len(),
        labeled: manifest.blobs.iter().filter(|b| b.label.is_some()).count(),
        threshold: page.threshold,
        warnings,
    })
}

/// Resolves the image a manifest refers to, relative to the manifest file.
pub fn manifest_image_path(manifest_path: &Path, manifest: &BlobManifest) -> PathBuf {
    let recorded = Path::new(&manifest.image_path);
    if recorded.is_absolute() {
        recorded.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new("")).join(recorded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportSummary {
    pub out: PathBuf,
    pub samples: usize,
    pub lines: usize,
    pub warnings: Vec<String>,
}

impl fmt::Display for ExportSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} samples ({} lines) -> {}", self.samples, self.lines, self.out.display())
    }
}

pub fn cmd_export_features(
    manifest_path: &Path,
    image: Option<&Path>,
    out: &Path,
    cfg: &PipelineConfig,
) -> CmdResult<ExportSummary> {
    let manifest = load_manifest(manifest_path)?;
    let unlabeled = manifest.unlabeled_ids();
    if !unlabeled.is_empty() {
        return Err(Error::UnlabeledBlob(unlabeled).into());
    }
    let mut warnings = Vec::new();
    let samples = if manifest.blobs.is_empty() {
        write_text(out, "")?;
        warnings.push(format!("{} has no blobs; wrote an empty training file", manifest_path.display()));
        0
    } else {
        let image = image.map_or_else(|| manifest_image_path(manifest_path, &manifest), Path::to_path_buf);
        let page = load_page(&image)?;
        let ts = training_set_from_manifest(&page, &manifest, &cfg.grid.alphabet)?;
        write_training_file(&ts, out)?;
        ts.len()
    };
    Ok(ExportSummary {
        out: out.to_path_buf(),
        samples,
        lines: samples * 3,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainOcrSummary {
    pub out: PathBuf,
    pub kind: ModelKind,
    pub samples: usize,
    pub classes: usize,
    pub training_accuracy: f64,
    pub warnings: Vec<String>,
}

impl fmt::Display for TrainOcrSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trained {:?} model on {} samples, {} classes, training accuracy {:.4} -> {}",
            self.kind,
            self.samples,
            self.classes,
            self.training_accuracy,
            self.out.display()
        )
    }
}

pub fn cmd_train_ocr(training: &Path, out: &Path, kind: ModelKind, cfg: &PipelineConfig) -> CmdResult<TrainOcrSummary> {
    let ts = read_training_file(training, &cfg.grid.alphabet)?;
    let model = match kind {
        ModelKind::Logreg => train_logreg(&ts, &cfg.hyperparams)?,
        ModelKind::Centroid => train_centroid(&ts)?,
    };
    save_model(&model, out)?;
    let eval = evaluate_ocr(&model, &ts)?;
    Ok(TrainOcrSummary {
        out: out.to_path_buf(),
        kind,
        samples: ts.len(),
        classes: ts.alphabet().len(),
        training_accuracy: eval.accuracy,
        warnings: eval.warning.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecognizeSummary {
    pub out: PathBuf,
    pub blobs: usize,
    pub lines: usize,
    pub text: String,
    pub warnings: Vec<String>,
}

impl fmt::Display for RecognizeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "recognized {} blobs on {} lines -> {}",
            self.blobs,
            self.lines,
            self.out.display()
        )
    }
}

/// Writes the recognized text, one line per text line, with a final newline.
pub fn cmd_recognize(image: &Path, model: &Path, out: &Path, cfg: &PipelineConfig) -> CmdResult<RecognizeSummary> {
    let model = load_model(model)?;
    let page = load_page(image)?;
    let rec = recognize(&page, &model, cfg.min_area, cfg.space_factor)?;
    let text = rec.text.joined();
    write_text(out, &format!("{text}\n"))?;
    let mut warnings = Vec::new();
    if rec.blobs.is_empty() {
        warnings.push(format!("no blobs found in {}", image.display()));
    }
    Ok(RecognizeSummary {
        out: out.to_path_buf(),
        blobs: rec.blobs.len(),
        lines: rec.text.lines.len(),
        text,
        warnings,
    })
}

pub fn compare_summary(r: &DiffReport) -> String {
    format!(
        "chars {}/{} ({}%), words {}/{} ({}%)",
        r.matched_chars,
        r.chars_original,
        r.char_match_display,
        r.matched_words,
        r.words_original,
        r.word_match_display
    )
}

/// Compares two text files. The report is also written to `out` when given.
pub fn cmd_compare(original: &Path, ocr: &Path, out: Option<&Path>) -> CmdResult<DiffReport> {
    let original = read_text(original)?;
    let ocr = read_text(ocr)?;
    let report = compare_texts(&original, &ocr)?;
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub out: PathBuf,
    pub documents: usize,
    pub per_class: BTreeMap<String, usize>,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let classes: Vec<String> = self.per_class.iter().map(|(c, n)| format!("{c}={n}")).collect();
        write!(
            f,
            "{} documents ({}) -> {}",
            self.documents,
            classes.join(", "),
            self.out.display()
        )
    }
}

/// Gathers labeled documents from `class=path` sources and class
/// directories into one corpus file.
pub fn cmd_ingest_corpus(sources: &[(String, PathBuf)], dirs: &[PathBuf], out: &Path) -> CmdResult<IngestSummary> {
    let mut docs = Vec::new();
    for (class, path) in sources {
        docs.extend(load_class_corpus(path, class)?);
    }
    for dir in dirs {
        docs.extend(load_corpus_dir(dir)?);
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    save_corpus(&docs, out)?;
    let mut per_class = BTreeMap::new();
    for d in &docs {
        *per_class.entry(d.label.clone().unwrap_or_default()).or_insert(0) += 1;
    }
    Ok(IngestSummary {
        out: out.to_path_buf(),
        documents: docs.len(),
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainNbSummary {
    pub out: PathBuf,
    pub documents: usize,
    pub classes: Vec<String>,
    pub vocabulary: usize,
    pub feature_mode: String,
}

impl fmt::Display for TrainNbSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trained naive Bayes ({}) on {} documents, classes {:?}, vocabulary {} -> {}",
            self.feature_mode,
            self.documents,
            self.classes,
            self.vocabulary,
            self.out.display()
        )
    }
}

pub fn cmd_train_nb(corpus: &Path, out: &Path, cfg: &PipelineConfig) -> CmdResult<TrainNbSummary> {
    let docs = load_corpus(corpus)?;
    let model = train_nb(&docs, &cfg.text_pipeline())?;
    save_nb_model(&model, out)?;
    Ok(TrainNbSummary {
        out: out.to_path_buf(),
        documents: docs.len(),
        classes: model.classes.clone(),
        vocabulary: model.vocab.len(),
        feature_mode: cfg.feature_mode.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classified {
    pub path: PathBuf,
    pub label: String,
    /// Class name to posterior probability.
    pub posteriors: BTreeMap<String, f64>,
}

pub fn cmd_classify(model: &Path, inputs: &[PathBuf]) -> CmdResult<Vec<Classified>> {
    let model = load_nb_model(model)?;
    inputs
        .iter()
        .map(|path| {
            let text = read_text(path)?;
            let r = classify_text(&model, &text);
            Ok(Classified {
                path: path.clone(),
                label: r.label,
                posteriors: model.classes.iter().cloned().zip(r.posteriors).collect(),
            })
        })
        .collect()
}

pub fn eval_summary(e: &NbEvaluation) -> String {
    format!(
        "accuracy {:.4} on {} test documents ({}, trained on {})",
        e.accuracy, e.n_test, e.feature_mode, e.n_train
    )
}

/// Evaluates a trained model on every document of a labeled corpus.
pub fn cmd_eval_nb(model: &Path, test_corpus: &Path, out: Option<&Path>) -> CmdResult<NbEvaluation> {
    let model = load_nb_model(model)?;
    let test = load_corpus(test_corpus)?;
    let eval = evaluate_nb(&model, &test)?;
    if let Some(out) = out {
        write_json(out, &eval)?;
    }
    Ok(eval)
}

/// Accuracy the significant-words classifier is compared against.
pub const REFERENCE_ACCURACY: f64 = 0.53;
/// Half-width of the band around [`REFERENCE_ACCURACY`].
pub const REFERENCE_BAND: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub k: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            n_train: 2200,
            n_test: 295,
            seed: 42,
            k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub split: SplitSpec,
    pub significant: NbEvaluation,
    pub full_bag: NbEvaluation,
    pub reference_accuracy: f64,
    pub within_band: bool,
    pub regression_warning: Option<String>,
}

impl fmt::Display for ReplicationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "significant_k({}) accuracy {:.4} ({} of {:.2} +/- {:.2}), full_bag accuracy {:.4}, {} train / {} test",
            self.split.k,
            self.significant.accuracy,
            if self.within_band { "within" } else { "outside" },
            self.reference_accuracy,
            REFERENCE_BAND,
            self.full_bag.accuracy,
            self.significant.n_train,
            self.significant.n_test
        )
    }
}

/// Seeded train/test split, then significant-words and full-bag models
/// trained and scored on the same split.
pub fn replicate_nb(docs: &[Document], split: SplitSpec, remove_stopwords: bool) -> CmdResult<ReplicationReport> {
    let (train, test) = split_corpus(docs, split.n_train, split.n_test, split.seed);
    let run = |mode: FeatureMode| -> CmdResult<NbEvaluation> {
        let pipeline = TextPipeline {
            feature_mode: mode,
            remove_stopwords,
        };
        Ok(evaluate_nb(&train_nb(&train, &pipeline)?, &test)?)
    };
    let significant = run(FeatureMode::SignificantK(split.k))?;
    let full_bag = run(FeatureMode::FullBag)?;
    let within_band = (significant.accuracy - REFERENCE_ACCURACY).abs() <= REFERENCE_BAND;
    let regression_warning = (full_bag.accuracy < significant.accuracy).then(|| {
        format!(
            "full_bag accuracy {:.4} is below significant_k({}) accuracy {:.4}",
            full_bag.accuracy, split.k, significant.accuracy
        )
    });
    Ok(ReplicationReport {
        split,
        significant,
        full_bag,
        reference_accuracy: REFERENCE_ACCURACY,
        within_band,
        regression_warning,
    })
}

pub fn cmd_replicate_nb(
    corpus: &Path,
    split: SplitSpec,
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> CmdResult<ReplicationReport> {
    let docs = load_corpus(corpus)?;
    let report = replicate_nb(&docs, split, cfg.stopwords_enabled)?;
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub out_dir: PathBuf,
    pub blob_count: usize,
    pub samples: usize,
    pub training_accuracy: f64,
    pub report: DiffReport,
    pub warnings: Vec<String>,
}

impl fmt::Display for PipelineSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} training samples (training accuracy {:.4}); {}",
            self.samples,
            self.training_accuracy,
            compare_summary(&self.report)
        )
    }
}

pub struct PipelineInputs<'a> {
    pub train_image: &'a Path,
    /// A reviewed manifest for the training image; segmented with the grid
    /// when absent.
    pub train_manifest: Option<&'a Path>,
    pub test_image: &'a Path,
    pub truth: &'a Path,
    pub out_dir: &'a Path,
    pub kind: ModelKind,
}

/// segment, export, train, recognize and compare in one go. Every
/// intermediate file lands in `out_dir`.
pub fn cmd_pipeline(inputs: &PipelineInputs<'_>, cfg: &PipelineConfig) -> CmdResult<PipelineSummary> {
    let out_dir = inputs.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let mut warnings = Vec::new();

    let (manifest_path, blob_count) = match inputs.train_manifest {
        Some(m) => (m.to_path_buf(), load_manifest(m)?.blobs.len()),
        None => {
            let stem = inputs.train_image.file_stem().unwrap_or_default();
            let path = out_dir.join(stem).with_extension("json");
            let seg = cmd_segment(inputs.train_image, cfg, true, Some(&path))?;
            warnings.extend(seg.warnings);
            (path, seg.blob_count)
        }
    };
    let training = out_dir.join("training.txt");
    let export = cmd_export_features(&manifest_path, Some(inputs.train_image), &training, cfg)?;
    warnings.extend(export.warnings);
    let model = out_dir.join("model.json");
    let train = cmd_train_ocr(&training, &model, inputs.kind, cfg)?;
    warnings.extend(train.warnings);
    let recognized = out_dir.join("recognized.txt");
    let rec = cmd_recognize(inputs.test_image, &model, &recognized, cfg)?;
    warnings.extend(rec.warnings);
    let report = cmd_compare(inputs.truth, &recognized, Some(&out_dir.join("report.json")))?;
    Ok(PipelineSummary {
        out_dir: out_dir.to_path_buf(),
        blob_count,
        samples: train.samples,
        training_accuracy: train.training_accuracy,
        report,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub sheet: PathBuf,
    pub page: PathBuf,
    pub truth: PathBuf,
    pub words: usize,
}

impl fmt::Display for SynthSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wrote {}, {} and {} ({} words)",
            self.sheet.display(),
            self.page.display(),
            self.truth.display(),
            self.words
        )
    }
}

/// Renders a training sheet for the configured grid plus a test page and its
/// ground truth. The test page uses `style.seed + 1` so its noise differs
/// from the sheet's.
pub fn cmd_synth(
    out_dir: &Path,
    style: &RenderStyle,
    text: Option<&str>,
    wrap: usize,
    cfg: &PipelineConfig,
) -> CmdResult<SynthSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let sheet = out_dir.join("sheet.png");
    write_png(&render_training_sheet(&cfg.grid, style)?, &sheet)?;

    let text = text.unwrap_or(SAMPLE_TEXT);
    let lines = wrap_words(text, wrap.max(1));
    let page_style = RenderStyle {
        seed: style.seed.wrapping_add(1),
        ..*style
    };
    let page = out_dir.join("page.png");
    write_png(&render_text_page(&lines, &page_style)?, &page)?;
    let truth = out_dir.join("page.txt");
    write_text(&truth, &format!("{}\n", lines.join("\n")))?;
    Ok(SynthSummary {
        sheet,
        page,
        truth,
        words: text.split_whitespace().count(),
    })
}
