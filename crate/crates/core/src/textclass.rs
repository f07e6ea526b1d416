//! Multinomial Naive Bayes over abstracts: SMART corpus ingestion,
//! tokenization, optional per-document "significant word" reduction,
//! training with add-one smoothing, classification and evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub label: Option<String>,
}

/// How a document's tokens become model features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Every token, with repetition.
    #[default]
    FullBag,
    /// The `k` most frequent distinct tokens of each document.
    SignificantK(usize),
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMode::FullBag => f.write_str("full_bag"),
            FeatureMode::SignificantK(k) => write!(f, "significant_k({k})"),
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    /// Accepts `full_bag`, `significant_k` (k = 5) and `significant_k(N)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "full_bag" => return Ok(FeatureMode::FullBag),
            "significant_k" => return Ok(FeatureMode::SignificantK(5)),
            _ => {}
        }
        let k = s
            .strip_prefix("significant_k(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|k| k.trim().parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature mode {s:?}")))?;
        Ok(FeatureMode::SignificantK(k))
    }
}

/// Tokenization and feature selection applied identically at training and
/// classification time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TextPipeline {
    pub feature_mode: FeatureMode,
    #[serde(default)]
    pub remove_stopwords: bool,
}

impl TextPipeline {
    pub fn features(&self, text: &str) -> Vec<String> {
        let tokens = tokenize(text, self.remove_stopwords);
        match self.feature_mode {
            FeatureMode::FullBag => tokens,
            FeatureMode::SignificantK(k) => significant_words(&tokens, k),
        }
    }
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as",
    "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
    "can", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
    "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
    "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "you", "your", "yours", "yourself", "yourselves",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercased maximal runs of ASCII letters, dropping tokens shorter than two
/// letters (and stopwords when asked).
pub fn tokenize(text: &str, remove_stopwords: bool) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| t.len() >= 2)
        .map(str::to_ascii_lowercase)
        .filter(|t| !(remove_stopwords && is_stopword(t)))
        .collect()
}

/// The `k` distinct tokens with the highest in-document frequency (ties to
/// the earlier first occurrence), returned in first-occurrence order.
pub fn significant_words(tokens: &[String], k: usize) -> Vec<String> {
    let mut stats: Vec<(&str, usize, usize)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (pos, t) in tokens.iter().enumerate() {
        match index.get(t.as_str()) {
            Some(&i) => stats[i].1 += 1,
            None => {
                index.insert(t, stats.len());
                stats.push((t, 1, pos));
            }
        }
    }
    let mut ranked = stats.clone();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.truncate(k);
    ranked.sort_by_key(|s| s.2);
    ranked.into_iter().map(|(t, _, _)| t.to_string()).collect()
}

fn is_section_marker(line: &str) -> bool {
    let b = line.as_bytes();
    b.len() >= 2 && b[0] == b'.' && b[1].is_ascii_uppercase() && (b.len() == 2 || b[2].is_ascii_whitespace())
}

/// Parses SMART dot-format text (`.I <id>` starts a document, the `.W`
/// section is its body; `.T`, `.A`, `.B`, `.X` and other sections are
/// skipped).
pub fn parse_smart_str(text: &str) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    let mut seen = HashSet::new();
    let mut in_body = false;
    let mut body: Vec<&str> = Vec::new();

    let flush = |docs: &mut Vec<Document>, body: &mut Vec<&str>| {
        if let Some(doc) = docs.last_mut() {
            doc.text = body.join("\n").trim().to_string();
        }
        body.clear();
    };

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let line_no = i + 1;
        if is_section_marker(line) {
            let tag = &line[..2];
            if tag == ".I" {
                flush(&mut docs, &mut body);
                let id = line[2..].trim();
                if id.is_empty() {
                    return Err(Error::format(line_no, ".I without a document id"));
                }
                if !seen.insert(id.to_string()) {
                    return Err(Error::format(line_no, format!("duplicate document id {id:?}")));
                }
                docs.push(Document {
                    doc_id: id.to_string(),
                    text: String::new(),
                    label: None,
                });
                in_body = false;
            } else {
                if docs.is_empty() {
                    return Err(Error::format(line_no, format!("{tag} before any .I")));
                }
                if tag == ".W" {
                    flush(&mut docs, &mut body);
                }
                in_body = tag == ".W";
            }
            continue;
        }
        if docs.is_empty() {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::format(line_no, "text before any .I"));
        }
        if in_body {
            body.push(line);
        }
    }
    flush(&mut docs, &mut body);
    Ok(docs)
}

pub fn parse_smart(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_smart_str(&text)
}

/// Loads one class's corpus from a SMART file or from a directory of
/// plain-text files (one document per file). Document ids are prefixed with
/// the class name so several classes can share one corpus.
pub fn load_class_corpus(path: impl AsRef<Path>, class: &str) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let mut docs = if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        entries
            .into_iter()
            .map(|p| {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let id = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(Document {
                    doc_id: id,
                    text,
                    label: None,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        parse_smart(path)?
    };
    for d in &mut docs {
        d.doc_id = format!("{class}:{}", d.doc_id);
        d.label = Some(class.to_string());
    }
    Ok(docs)
}

/// Loads `root/<class>/<file>` documents, one class per subdirectory.
pub fn load_corpus_dir(root: impl AsRef<Path>) -> Result<Vec<Document>> {
    let root = root.as_ref();
    let mut classes: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    classes.sort();
    let mut docs = Vec::new();
    for dir in classes {
        let class = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        docs.extend(load_class_corpus(&dir, &class)?);
    }
    Ok(docs)
}

/// Seeded shuffle, then the first `n_train` documents train and the next
/// `n_test` (or whatever remains) test.
pub fn split_corpus(docs: &[Document], n_train: usize, n_test: usize, seed: u64) -> (Vec<Document>, Vec<Document>) {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = n_train.min(docs.len());
    let train = order[..n_train].iter().map(|&i| docs[i].clone()).collect();
    let test = order[n_train..]
        .iter()
        .take(n_test)
        .map(|&i| docs[i].clone())
        .collect();
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    /// Sorted class names.
    pub classes: Vec<String>,
    /// Natural-log class priors.
    pub log_priors: Vec<f64>,
    /// Sorted, unique training vocabulary.
    pub vocab: Vec<String>,
    /// `word_counts[class][word]`, aligned with `vocab`.
    pub word_counts: Vec<Vec<u64>>,
    pub class_totals: Vec<u64>,
    pub doc_counts: Vec<usize>,
    pub pipeline: TextPipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub label: String,
    pub log_posteriors: Vec<f64>,
    pub posteriors: Vec<f64>,
}

impl NbModel {
    pub fn n_train(&self) -> usize {
        self.doc_counts.iter().sum()
    }

    pub fn priors(&self) -> Vec<f64> {
        self.log_priors.iter().map(|l| l.exp()).collect()
    }

    fn word_index(&self, token: &str) -> Option<usize> {
        self.vocab.binary_search_by(|w| w.as_str().cmp(token)).ok()
    }

    /// Unnormalized per-class log scores.
    pub fn log_scores(&self, tokens: &[String]) -> Vec<f64> {
        let v = self.vocab.len() as f64;
        let known: Vec<usize> = tokens.iter().filter_map(|t| self.word_index(t)).collect();
        (0..self.classes.len())
            .map(|c| {
                let denom = (self.class_totals[c] as f64 + v).ln();
                self.log_priors[c]
                    + known
                        .iter()
                        .map(|&w| (self.word_counts[c][w] as f64 + 1.0).ln() - denom)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.classes.len();
        if n < 2 {
            return Err(Error::Schema("classes: need at least two classes".into()));
        }
        if self.log_priors.len() != n
            || self.word_counts.len() != n
            || self.class_totals.len() != n
            || self.doc_counts.len() != n
        {
            return Err(Error::Schema("per-class arrays disagree in length".into()));
        }
        if self.vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema("vocab: must be sorted and unique".into()));
        }
        for (c, row) in self.word_counts.iter().enumerate() {
            if row.len() != self.vocab.len() {
                return Err(Error::Schema(format!("word_counts[{c}]: length mismatch")));
            }
        }
        Ok(())
    }
}

/// Counts class priors and per-class word frequencies.
pub fn train_nb(docs: &[Document], pipeline: &TextPipeline) -> Result<NbModel> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut per_class: BTreeMap<&str, (usize, HashMap<String, u64>)> = BTreeMap::new();
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for doc in docs {
        let label = doc
            .label
            .as_deref()
            .ok_or_else(|| Error::MissingLabel(doc.doc_id.clone()))?;
        let entry = per_class.entry(label).or_default();
        entry.0 += 1;
        for tok in pipeline.features(&doc.text) {
            *entry.1.entry(tok.clone()).or_default() += 1;
            vocab.insert(tok);
        }
    }
    if per_class.len() < 2 {
        return Err(Error::SingleClass);
    }
    let vocab: Vec<String> = vocab.into_iter().collect();
    let total_docs = docs.len() as f64;
    let mut model = NbModel {
        classes: Vec::new(),
        log_priors: Vec::new(),
        vocab,
        word_counts: Vec::new(),
        class_totals: Vec::new(),
        doc_counts: Vec::new(),
        pipeline: *pipeline,
    };
    for (class, (n_docs, counts)) in per_class {
        let row: Vec<u64> = model
            .vocab
            .iter()
            .map(|w| counts.get(w).copied().unwrap_or(0))
            .collect();
        model.class_totals.push(row.iter().sum());
        model.word_counts.push(row);
        model.classes.push(class.to_string());
        model.log_priors.push((n_docs as f64 / total_docs).ln());
        model.doc_counts.push(n_docs);
    }
    Ok(model)
}

/// Scores already-selected feature tokens; tokens outside the vocabulary
/// are skipped.
pub fn classify(model: &NbModel, tokens: &[String]) -> ClassificationResult {
    let log_scores = model.log_scores(tokens);
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + log_scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let log_posteriors: Vec<f64> = log_scores.iter().map(|s| s - lse).collect();
    let posteriors: Vec<f64> = log_posteriors.iter().map(|l| l.exp()).collect();
    let mut best = 0;
    for (i, &s) in log_scores.iter().enumerate().skip(1) {
        if s > log_scores[best] {
            best = i;
        }
    }
    ClassificationResult {
        label: model.classes[best].clone(),
        log_posteriors,
        posteriors,
    }
}

/// Tokenizes with the model's own pipeline, then classifies.
pub fn classify_text(model: &NbModel, text: &str) -> ClassificationResult {
    classify(model, &model.pipeline.features(text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbEvaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`, indexed like the model's classes.
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub feature_mode: String,
}

pub fn evaluate_nb(model: &NbModel, test: &[Document]) -> Result<NbEvaluation> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let n = model.classes.len();
    let mut confusion = vec![vec![0usize; n]; n];
    let mut correct = 0;
    for doc in test {
        let label = doc
            .label
            .as_deref()
            .ok_or_else(|| Error::MissingLabel(doc.doc_id.clone()))?;
        let truth = model
            .classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))?;
        let result = classify_text(model, &doc.text);
        let predicted = model
            .classes
            .iter()
            .position(|c| *c == result.label)
            .expect("label comes from the model");
        confusion[truth][predicted] += 1;
        if truth == predicted {
            correct += 1;
        }
    }
    Ok(NbEvaluation {
        accuracy: correct as f64 / test.len() as f64,
        confusion,
        classes: model.classes.clone(),
        n_train: model.n_train(),
        n_test: test.len(),
        feature_mode: model.pipeline.feature_mode.to_string(),
    })
}

pub fn save_nb_model(model: &NbModel, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string(model).expect("model serializes");
    write_atomic(path.as_ref(), json.as_bytes())
}

pub fn load_nb_model(path: impl AsRef<Path>) -> Result<NbModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: NbModel = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn save_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(docs).expect("corpus serializes");
    write_atomic(path.as_ref(), json.as_bytes())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let docs: Vec<Document> = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    let mut seen = HashSet::new();
    for d in &docs {
        if !seen.insert(d.doc_id.as_str()) {
            return Err(Error::Schema(format!("duplicate doc_id {:?}", d.doc_id)));
        }
    }
    Ok(docs)
}
