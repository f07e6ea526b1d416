//! Character classifier trained on [`TrainingSet`] features.
//!
//! The main model is one-vs-all L2-regularized logistic regression fitted by
//! fixed-length batch gradient descent from zero weights, so training is
//! bit-reproducible. A nearest-centroid model is kept as a baseline.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::TrainingSet;
use crate::segmentation::write_atomic;

/// Bounds applied to the sigmoid output before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2_lambda: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            iterations: 400,
            l2_lambda: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "l2_lambda must be non-negative, got {}",
                self.l2_lambda
            )));
        }
        Ok(())
    }
}

/// Row-major `rows x cols` matrix whose first column is the bias input.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Wraps raw data; the caller supplies the leading column of ones.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Prepends a bias column of ones to every feature row.
    pub fn with_bias<'a>(features: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut data = Vec::new();
        let mut rows = 0;
        for row in features {
            assert_eq!(row.len(), dim, "feature row length");
            data.push(1.0);
            data.extend_from_slice(row);
            rows += 1;
        }
        Self {
            rows,
            cols: dim + 1,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized logistic cost and gradient at `theta`.
///
/// The bias weight (`theta[0]`) is not regularized.
pub fn logreg_cost_grad(theta: &[f64], x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if theta.len() != x.cols {
        return Err(Error::DimensionMismatch {
            expected: x.cols,
            got: theta.len(),
        });
    }
    if y.len() != x.rows {
        return Err(Error::DimensionMismatch {
            expected: x.rows,
            got: y.len(),
        });
    }
    if x.rows == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let m = x.rows as f64;
    let mut cost = 0.0;
    let mut grad = vec![0.0; x.cols];
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let h = sigmoid(dot(row, theta));
        let hc = h.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        cost -= yi * hc.ln() + (1.0 - yi) * (1.0 - hc).ln();
        let residual = h - yi;
        for (g, xv) in grad.iter_mut().zip(row) {
            *g += residual * xv;
        }
    }
    cost /= m;
    let penalty: f64 = theta[1..].iter().map(|t| t * t).sum();
    cost += lambda / (2.0 * m) * penalty;
    for (j, g) in grad.iter_mut().enumerate() {
        *g /= m;
        if j > 0 {
            *g += lambda / m * theta[j];
        }
    }
    Ok((cost, grad))
}

/// Result of fitting one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub theta: Vec<f64>,
    /// Cost before each step, followed by the cost of the final weights.
    pub costs: Vec<f64>,
}

/// Batch gradient descent from zero for exactly `hp.iterations` steps.
pub fn fit_binary(x: &DesignMatrix, y: &[f64], hp: &Hyperparams) -> Result<BinaryFit> {
    hp.validate()?;
    let mut theta = vec![0.0; x.cols];
    let mut costs = Vec::with_capacity(hp.iterations + 1);
    for _ in 0..hp.iterations {
        let (cost, grad) = logreg_cost_grad(&theta, x, y, hp.l2_lambda)?;
        costs.push(cost);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= hp.learning_rate * g;
        }
    }
    costs.push(logreg_cost_grad(&theta, x, y, hp.l2_lambda)?.0);
    Ok(BinaryFit { theta, costs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Centroid,
}

/// Trained character classifier; one row per alphabet letter.
///
/// Logreg rows hold `dim + 1` weights (bias first); centroid rows hold `dim`
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrModel {
    pub kind: ModelKind,
    pub alphabet: String,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: char,
    pub scores: Vec<f64>,
}

impl OcrModel {
    /// Feature dimension the model expects.
    pub fn input_dim(&self) -> usize {
        let width = self.rows.first().map_or(0, Vec::len);
        match self.kind {
            ModelKind::Logreg => width.saturating_sub(1),
            ModelKind::Centroid => width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let letters = self.alphabet.chars().count();
        if self.rows.len() != letters {
            return Err(Error::Schema(format!(
                "rows: {} rows for an alphabet of {letters} letters",
                self.rows.len()
            )));
        }
        let width = self.rows.first().map_or(0, Vec::len);
        let min_width = if self.kind == ModelKind::Logreg { 2 } else { 1 };
        if width < min_width {
            return Err(Error::Schema("rows: model rows are too short".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Schema(format!("rows[{i}]: length {} != {width}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("rows[{i}]: non-finite value")));
            }
        }
        Ok(())
    }
}

fn class_counts(ts: &TrainingSet) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; ts.alphabet().len()];
    for &l in ts.labels() {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(ts.alphabet()[c].to_string()));
    }
    Ok(counts)
}

/// One-vs-all logistic regression, one binary problem per letter.
///
/// The binary problems run in parallel; rows are stored in alphabet order.
pub fn train_logreg(ts: &TrainingSet, hp: &Hyperparams) -> Result<OcrModel> {
    hp.validate()?;
    class_counts(ts)?;
    let x = DesignMatrix::with_bias(ts.rows(), ts.dim());
    let rows = (0..ts.alphabet().len())
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = ts
                .labels()
                .iter()
                .map(|&l| if l == class { 1.0 } else { 0.0 })
                .collect();
            fit_binary(&x, &y, hp).map(|fit| fit.theta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OcrModel {
        kind: ModelKind::Logreg,
        alphabet: ts.alphabet_string(),
        rows,
    })
}

/// Per-letter mean feature row.
pub fn train_centroid(ts: &TrainingSet) -> Result<OcrModel> {
    let counts = class_counts(ts)?;
    let mut rows = vec![vec![0.0; ts.dim()]; counts.len()];
    for (row, &l) in ts.rows().zip(ts.labels()) {
        for (acc, v) in rows[l].iter_mut().zip(row) {
            *acc += v;
        }
    }
    for (row, &n) in rows.iter_mut().zip(&counts) {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    Ok(OcrModel {
        kind: ModelKind::Centroid,
        alphabet: ts.alphabet_string(),
        rows,
    })
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn predict(model: &OcrModel, features: &[f64]) -> Result<Prediction> {
    let dim = model.input_dim();
    if features.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: features.len(),
        });
    }
    let scores: Vec<f64> = match model.kind {
        ModelKind::Logreg => model
            .rows
            .iter()
            .map(|w| sigmoid(w[0] + dot(&w[1..], features)))
            .collect(),
        ModelKind::Centroid => model
            .rows
            .iter()
            .map(|c| {
                -c.iter()
                    .zip(features)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
    };
    let label = model
        .alphabet
        .chars()
        .nth(argmax(&scores))
        .ok_or_else(|| Error::Schema("model has an empty alphabet".into()))?;
    Ok(Prediction { label, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcrEvaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Set when the accuracy is not meaningful (empty test set).
    pub warning: Option<String>,
}

/// Fraction of samples whose predicted letter equals their label.
///
/// An empty set yields accuracy 0.0 with a warning instead of an error.
pub fn evaluate_ocr(model: &OcrModel, ts: &TrainingSet) -> Result<OcrEvaluation> {
    if ts.is_empty() {
        return Ok(OcrEvaluation {
            accuracy: 0.0,
            correct: 0,
            total: 0,
            warning: Some("empty evaluation set; accuracy reported as 0".into()),
        });
    }
    let mut correct = 0;
    for (row, &l) in ts.rows().zip(ts.labels()) {
        if predict(model, row)?.label == ts.alphabet()[l] {
            correct += 1;
        }
    }
    Ok(OcrEvaluation {
        accuracy: correct as f64 / ts.len() as f64,
        correct,
        total: ts.len(),
        warning: None,
    })
}

pub fn save_model(model: &OcrModel, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string(model).expect("model serializes");
    write_atomic(path.as_ref(), json.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OcrModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: OcrModel = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    model.validate()?;
    Ok(model)
}
