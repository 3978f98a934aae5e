//! Flow-record threat detection: preprocessing, model selection over three
//! from-scratch classifiers, prediction, batch prediction, and evaluation.
//!
//! Training fits preprocessing on the training side of an internal
//! stratified 80/20 split, trains a decision tree, Gaussian naive Bayes and
//! a k-NN classifier on it, and keeps whichever scores the highest macro-F1
//! on the validation side (ties prefer tree, then naive Bayes, then k-NN).
//! The selected candidate is kept as fitted — there is no refit on the full
//! data — so the recorded validation score describes exactly the shipped
//! classifier. Everything downstream of a `(dataset, config, seed)` triple
//! is deterministic, including the model's content-hash version.

pub mod knn;
pub mod naive_bayes;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flows::{self, ColumnRole, Dataset, FeatureSchema, FlowRecord};
use crate::metrics::{self, EvalReport, FeatureImportance};

pub use knn::KnnClassifier;
pub use naive_bayes::GaussianNb;
pub use tree::DecisionTree;

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Feature name given to the derived seconds-of-day timestamp feature.
pub const TIMESTAMP_FEATURE: &str = "timestamp_seconds";

/// Fitted transform for one numeric feature: median imputation followed by
/// a z-score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericParam {
    pub name: String,
    /// Imputation value for missing/non-finite entries, the median of the
    /// finite training values.
    pub median: f64,
    /// Mean and population standard deviation of the post-imputation
    /// training values. A stddev of 0 marks the feature constant; its
    /// transform emits 0.
    pub mean: f64,
    pub stddev: f64,
}

impl NumericParam {
    fn transform(&self, raw: f64) -> f64 {
        let v = if raw.is_finite() { raw } else { self.median };
        if self.stddev > 0.0 {
            (v - self.mean) / self.stddev
        } else {
            0.0
        }
    }
}

/// Fitted frequency encoding for one categorical feature: each category maps
/// to its training-set relative frequency; unseen categories encode to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalParam {
    pub name: String,
    pub frequencies: BTreeMap<String, f64>,
}

/// The full fitted preprocessing state.
///
/// Identifier features — the source/destination IP encodings, the derived
/// timestamp feature, and the port/protocol columns — are included by
/// default (they dominate separability on flow data, which is exactly why
/// an exclusion policy exists: they leak the endpoints' identities).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub include_identifiers: bool,
    /// Frequency-encoded features, in order: `source_ip`, `destination_ip`.
    /// Empty when identifiers are excluded.
    pub categorical: Vec<CategoricalParam>,
    /// Seconds-of-day feature; `None` when excluded or when no training
    /// record carries a timestamp.
    pub timestamp: Option<NumericParam>,
    /// Numeric columns in schema order, minus excluded identifier columns.
    pub numeric: Vec<NumericParam>,
    /// All feature names in encoded-vector order.
    pub feature_order: Vec<String>,
}

/// True for numeric columns that identify endpoints rather than describe
/// behaviour (ports and protocol).
fn is_identifier_column(name: &str) -> bool {
    matches!(
        flows::column_role(name),
        ColumnRole::SourcePort | ColumnRole::DestinationPort | ColumnRole::Protocol
    )
}

/// Median of the given values (callers guarantee non-empty, finite).
fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Mean and population standard deviation.
fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fit_numeric(name: &str, raw: impl Iterator<Item = f64> + Clone) -> Result<NumericParam> {
    let mut finite: Vec<f64> = raw.clone().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Schema(format!(
            "feature `{name}` has no finite values in the training data"
        )));
    }
    let median = median_of(&mut finite);
    let imputed: Vec<f64> = raw
        .map(|v| if v.is_finite() { v } else { median })
        .collect();
    let (mean, stddev) = mean_stddev(&imputed);
    Ok(NumericParam {
        name: name.to_string(),
        median,
        mean,
        stddev,
    })
}

/// Parses a clock time out of a timestamp string as seconds of day.
///
/// Accepts `H:M` or `H:M:S`, 24-hour or 12-hour with an `AM`/`PM` marker
/// (attached or as its own token), anywhere in the string — e.g.
/// `4/7/2017 11:52:31` or `1:45 PM`. Returns `None` when no valid time is
/// present.
pub fn parse_time_of_day(text: &str) -> Option<f64> {
    let mut time_tok: Option<&str> = None;
    let mut meridiem: Option<bool> = None; // Some(true) = PM
    for tok in text.split_whitespace() {
        if tok.contains(':') && time_tok.is_none() {
            time_tok = Some(tok);
        } else if tok.eq_ignore_ascii_case("am") {
            meridiem = Some(false);
        } else if tok.eq_ignore_ascii_case("pm") {
            meridiem = Some(true);
        }
    }
    let mut t = time_tok?;
    let lower = t.to_ascii_lowercase();
    if lower.ends_with("am") || lower.ends_with("pm") {
        meridiem = Some(lower.ends_with("pm"));
        t = &t[..t.len() - 2];
    }
    let parts: Vec<&str> = t.split(':').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return None;
    }
    let h: u32 = parts[0].trim().parse().ok()?;
    let m: u32 = parts[1].trim().parse().ok()?;
    let s: u32 = if parts.len() == 3 {
        parts[2].trim().parse().ok()?
    } else {
        0
    };
    if m > 59 || s > 59 {
        return None;
    }
    let h24 = match meridiem {
        None if h <= 23 => h,
        None => return None,
        Some(pm) if (1..=12).contains(&h) => (h % 12) + if pm { 12 } else { 0 },
        Some(_) => return None,
    };
    Some(f64::from(h24 * 3600 + m * 60 + s))
}

/// Fits preprocessing parameters on a training dataset.
///
/// Medians come from finite values only; mean/stddev from the
/// post-imputation column. Categorical frequency tables and the timestamp
/// statistics come from the same records. Errors name the first feature
/// with no usable training values.
pub fn preprocess_fit(train: &Dataset, include_identifiers: bool) -> Result<PreprocessParams> {
    if train.records.is_empty() {
        return Err(Error::Config(
            "cannot fit preprocessing on an empty dataset".into(),
        ));
    }
    let n = train.records.len() as f64;

    let mut categorical = Vec::new();
    let mut timestamp = None;
    if include_identifiers {
        let fit_categorical = |name: &str, values: Vec<&str>| -> CategoricalParam {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for v in values {
                *counts.entry(v).or_default() += 1;
            }
            CategoricalParam {
                name: name.to_string(),
                frequencies: counts
                    .into_iter()
                    .map(|(k, c)| (k.to_string(), c as f64 / n))
                    .collect(),
            }
        };
        categorical.push(fit_categorical(
            "source_ip",
            train.records.iter().map(|r| r.source_ip.as_str()).collect(),
        ));
        categorical.push(fit_categorical(
            "destination_ip",
            train
                .records
                .iter()
                .map(|r| r.destination_ip.as_str())
                .collect(),
        ));

        let has_any = train.records.iter().any(|r| r.timestamp.is_some());
        if has_any {
            let parsed: Vec<Option<f64>> = train
                .records
                .iter()
                .map(|r| r.timestamp.as_deref().and_then(parse_time_of_day))
                .collect();
            let mut finite: Vec<f64> = parsed.iter().filter_map(|v| *v).collect();
            if finite.is_empty() {
                return Err(Error::Schema(format!(
                    "feature `{TIMESTAMP_FEATURE}` has no parseable values in the training data"
                )));
            }
            let median = median_of(&mut finite);
            let imputed: Vec<f64> = parsed.iter().map(|v| v.unwrap_or(median)).collect();
            let (mean, stddev) = mean_stddev(&imputed);
            timestamp = Some(NumericParam {
                name: TIMESTAMP_FEATURE.to_string(),
                median,
                mean,
                stddev,
            });
        }
    }

    let mut numeric = Vec::new();
    for (col, name) in train.schema.numeric_names.iter().enumerate() {
        if !include_identifiers && is_identifier_column(name) {
            continue;
        }
        numeric.push(fit_numeric(
            name,
            train
                .records
                .iter()
                .map(move |r| r.values.get(col).copied().unwrap_or(f64::NAN)),
        )?);
    }

    let feature_order = categorical
        .iter()
        .map(|c| c.name.clone())
        .chain(timestamp.iter().map(|t| t.name.clone()))
        .chain(numeric.iter().map(|p| p.name.clone()))
        .collect();
    Ok(PreprocessParams {
        include_identifiers,
        categorical,
        timestamp,
        numeric,
        feature_order,
    })
}

/// Resolved mapping from a record schema's numeric columns onto the fitted
/// numeric features. Build once per schema, then apply per record.
pub struct SchemaBinding {
    /// For each fitted numeric feature, the column index in the record
    /// schema.
    numeric_idx: Vec<usize>,
}

impl PreprocessParams {
    /// Checks a record schema covers every fitted numeric feature (matched
    /// case-insensitively) and resolves column indices. Errors name the
    /// first missing feature.
    pub fn bind(&self, schema: &FeatureSchema) -> Result<SchemaBinding> {
        let mut numeric_idx = Vec::with_capacity(self.numeric.len());
        for p in &self.numeric {
            let idx = schema
                .numeric_names
                .iter()
                .position(|n| n.eq_ignore_ascii_case(&p.name))
                .ok_or_else(|| {
                    Error::Schema(format!("record schema is missing feature `{}`", p.name))
                })?;
            numeric_idx.push(idx);
        }
        Ok(SchemaBinding { numeric_idx })
    }

    /// Encodes one record through a prepared binding. Infallible: missing
    /// or non-finite entries impute, unseen categories encode to 0, a
    /// missing timestamp imputes to its median.
    pub fn apply_bound(&self, binding: &SchemaBinding, record: &FlowRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_order.len());
        for cat in &self.categorical {
            let value = match cat.name.as_str() {
                "source_ip" => record.source_ip.as_str(),
                _ => record.destination_ip.as_str(),
            };
            out.push(cat.frequencies.get(value).copied().unwrap_or(0.0));
        }
        if let Some(ts) = &self.timestamp {
            let raw = record
                .timestamp
                .as_deref()
                .and_then(parse_time_of_day)
                .unwrap_or(ts.median);
            out.push(ts.transform(raw));
        }
        for (p, &col) in self.numeric.iter().zip(&binding.numeric_idx) {
            out.push(p.transform(record.values.get(col).copied().unwrap_or(f64::NAN)));
        }
        out
    }

    /// One-shot encode of a single record (binds, then applies).
    pub fn apply(&self, record: &FlowRecord) -> Result<Vec<f64>> {
        Ok(self.apply_bound(&self.bind(&record.schema)?, record))
    }
}

// ---------------------------------------------------------------------------
// Training and the trained model
// ---------------------------------------------------------------------------

/// Training configuration. Defaults: identifiers included, 5 records per
/// class minimum, tree depth 12 / leaf 5, k-NN k 5, 20% validation split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub include_identifiers: bool,
    pub min_class_count: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub knn_k: usize,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            include_identifiers: true,
            min_class_count: 5,
            max_depth: 12,
            min_leaf: 5,
            knn_k: 5,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_class_count < 2 {
            return Err(Error::Config(
                "min_class_count must be at least 2 (every class must appear on both split sides)"
                    .into(),
            ));
        }
        if self.max_depth < 1 || self.min_leaf < 1 || self.knn_k < 1 {
            return Err(Error::Config(
                "max_depth, min_leaf and knn_k must all be at least 1".into(),
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction must lie strictly between 0 and 1, got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// A fitted classifier of one of the three candidate families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    DecisionTree(DecisionTree),
    NaiveBayes(GaussianNb),
    Knn(KnnClassifier),
}

impl Classifier {
    pub fn name(&self) -> &'static str {
        match self {
            Classifier::DecisionTree(_) => "decision_tree",
            Classifier::NaiveBayes(_) => "naive_bayes",
            Classifier::Knn(_) => "knn",
        }
    }

    /// Class scores for one encoded record; entries are in [0, 1] and sum
    /// to 1 (within float rounding).
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        match self {
            Classifier::DecisionTree(t) => t.scores(row),
            Classifier::NaiveBayes(nb) => nb.scores(row),
            Classifier::Knn(k) => k.scores(row),
        }
    }

    /// Scores many rows in parallel, preserving order.
    pub fn batch_scores(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.par_iter().map(|r| self.scores(r)).collect()
    }
}

/// One candidate's validation outcome, recorded in the trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub name: String,
    pub validation_macro_f1: f64,
    pub selected: bool,
}

/// A trained, immutable detection model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: PreprocessParams,
    pub classifier: Classifier,
    /// Class names in score order (sorted ascending).
    pub class_order: Vec<String>,
    pub selection_report: Vec<CandidateScore>,
    /// Hex SHA-256 over the canonical serialization of all fitted content.
    pub version: String,
    pub train_seed: u64,
}

/// Index of the first maximal score. With a sorted class order this makes
/// argmax ties resolve to the lexicographically smallest class.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in scores.iter().enumerate().skip(1) {
        if *v > scores[best] {
            best = i;
        }
    }
    best
}

fn encode_labeled(
    params: &PreprocessParams,
    ds: &Dataset,
    class_order: &[String],
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let binding = params.bind(&ds.schema)?;
    let mut matrix = Vec::with_capacity(ds.records.len());
    let mut labels = Vec::with_capacity(ds.records.len());
    for (i, r) in ds.records.iter().enumerate() {
        let label = r.label.as_ref().ok_or_else(|| {
            Error::Schema(format!(
                "record {} has no label; labels are required",
                i + 1
            ))
        })?;
        let idx = class_order
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Schema(format!("label `{label}` is not a known class")))?;
        matrix.push(params.apply_bound(&binding, r));
        labels.push(idx);
    }
    Ok((matrix, labels))
}

/// Macro-F1 of index-encoded predictions, via the shared metric path.
fn macro_f1_from_indices(
    class_order: &[String],
    predicted: &[usize],
    truths: &[usize],
) -> Result<f64> {
    let n = class_order.len();
    let mut counts = vec![vec![0usize; n]; n];
    for (&p, &t) in predicted.iter().zip(truths) {
        counts[t][p] += 1;
    }
    let cm = metrics::ConfusionMatrix {
        classes: class_order.to_vec(),
        counts,
        dropped: vec![0; n],
    };
    Ok(metrics::f1_scores(&cm)?.macro_)
}

/// Trains the three candidates and keeps the best by validation macro-F1.
///
/// Requires at least two classes and `config.min_class_count` records per
/// class. The target is each record's label. Deterministic per
/// `(data, config, seed)`.
pub fn train(data: &Dataset, config: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    config.validate()?;
    for (i, r) in data.records.iter().enumerate() {
        if r.label.is_none() {
            return Err(Error::Schema(format!(
                "record {} has no label; training requires fully labeled data",
                i + 1
            )));
        }
    }
    let class_order = data.class_names.clone();
    if class_order.len() < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 classes, found {}",
            class_order.len()
        )));
    }
    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &data.records {
        *per_class
            .entry(r.label.as_deref().unwrap_or_default())
            .or_default() += 1;
    }
    for (name, count) in &per_class {
        if *count < config.min_class_count {
            return Err(Error::Config(format!(
                "class `{name}` has {count} record(s) but training requires at least {}",
                config.min_class_count
            )));
        }
    }

    let (fit_part, val_part) = flows::split(data, config.validation_fraction, seed, true)?;
    let params = preprocess_fit(&fit_part, config.include_identifiers)?;
    let k = class_order.len();
    let (x_fit, y_fit) = encode_labeled(&params, &fit_part, &class_order)?;
    let (x_val, y_val) = encode_labeled(&params, &val_part, &class_order)?;

    let candidates = vec![
        Classifier::DecisionTree(tree::fit(
            &x_fit,
            &y_fit,
            k,
            config.max_depth,
            config.min_leaf,
        )),
        Classifier::NaiveBayes(naive_bayes::fit(&x_fit, &y_fit, k)),
        Classifier::Knn(knn::fit(x_fit, y_fit, k, config.knn_k)),
    ];

    let mut selection_report = Vec::with_capacity(candidates.len());
    let mut best: usize = 0;
    let mut best_f1 = f64::NEG_INFINITY;
    for (i, cand) in candidates.iter().enumerate() {
        let predicted: Vec<usize> = cand
            .batch_scores(&x_val)
            .iter()
            .map(|s| argmax(s))
            .collect();
        let f1 = macro_f1_from_indices(&class_order, &predicted, &y_val)?;
        selection_report.push(CandidateScore {
            name: cand.name().to_string(),
            validation_macro_f1: f1,
            selected: false,
        });
        // Strict improvement only: candidate order tree, naive Bayes, k-NN
        // encodes the tie preference.
        if f1 > best_f1 {
            best_f1 = f1;
            best = i;
        }
    }
    selection_report[best].selected = true;
    let classifier = candidates
        .into_iter()
        .nth(best)
        .expect("selected index in range");

    let version = content_version(&params, &classifier, &class_order, &selection_report, seed)?;
    Ok(TrainedModel {
        params,
        classifier,
        class_order,
        selection_report,
        version,
        train_seed: seed,
    })
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// One scored record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Class names aligned with `scores`.
    pub classes: Vec<String>,
    /// Probabilities in [0, 1] summing to 1 (within 1e-9).
    pub scores: Vec<f64>,
    /// Argmax class; ties resolve to the lexicographically smallest.
    pub predicted: String,
}

/// Scores one record with a trained model.
pub fn predict(model: &TrainedModel, record: &FlowRecord) -> Result<PredictionResult> {
    let x = model.params.apply(record)?;
    let scores = model.classifier.scores(&x);
    let predicted = model.class_order[argmax(&scores)].clone();
    Ok(PredictionResult {
        classes: model.class_order.clone(),
        scores,
        predicted,
    })
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

/// Model files start with these magic bytes.
pub const MODEL_MAGIC: [u8; 4] = *b"CRDM";
/// Format version this build writes and reads.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelContent {
    params: PreprocessParams,
    classifier: Classifier,
    class_order: Vec<String>,
    selection_report: Vec<CandidateScore>,
    train_seed: u64,
}

/// Canonical content bytes: the content serialized through
/// `serde_json::Value` so object keys are sorted and the bytes are
/// independent of struct field order. The model's version is the hex
/// SHA-256 of exactly these bytes.
fn canonical_content_bytes(
    params: &PreprocessParams,
    classifier: &Classifier,
    class_order: &[String],
    selection_report: &[CandidateScore],
    train_seed: u64,
) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct View<'a> {
        params: &'a PreprocessParams,
        classifier: &'a Classifier,
        class_order: &'a [String],
        selection_report: &'a [CandidateScore],
        train_seed: u64,
    }
    let value = serde_json::to_value(View {
        params,
        classifier,
        class_order,
        selection_report,
        train_seed,
    })
    .map_err(|e| Error::Model(format!("serializing model content: {e}")))?;
    serde_json::to_vec(&value).map_err(|e| Error::Model(format!("serializing model content: {e}")))
}

fn content_version(
    params: &PreprocessParams,
    classifier: &Classifier,
    class_order: &[String],
    selection_report: &[CandidateScore],
    train_seed: u64,
) -> Result<String> {
    let bytes = canonical_content_bytes(
        params,
        classifier,
        class_order,
        selection_report,
        train_seed,
    )?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Byte offset of the JSON content in a model file: 4 magic bytes, 4 format
/// version bytes, 64 hex hash characters.
const MODEL_HEADER_LEN: usize = 4 + 4 + 64;

/// Writes a model file: `CRDM` magic, little-endian format version, the hex
/// SHA-256 of the content bytes, then the JSON content itself.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let content = canonical_content_bytes(
        &model.params,
        &model.classifier,
        &model.class_order,
        &model.selection_report,
        model.train_seed,
    )?;
    let hash = hex::encode(Sha256::digest(&content));
    let mut bytes = Vec::with_capacity(MODEL_HEADER_LEN + content.len());
    bytes.extend_from_slice(&MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(hash.as_bytes());
    bytes.extend_from_slice(&content);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a model file, verifying magic, format version, and the content
/// hash (over the raw stored bytes, before any parsing — corruption never
/// yields a partial model).
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() >= 4 && bytes[0..4] != MODEL_MAGIC {
        return Err(Error::Model("not a model file (bad magic bytes)".into()));
    }
    if bytes.len() < MODEL_HEADER_LEN {
        return Err(Error::Model("model file truncated".into()));
    }
    let fmt = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if fmt != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version {fmt} (this build reads version {MODEL_FORMAT_VERSION})"
        )));
    }
    let stored_hash = std::str::from_utf8(&bytes[8..MODEL_HEADER_LEN])
        .map_err(|_| Error::Model("model file corrupt: invalid hash field".into()))?;
    let content = &bytes[MODEL_HEADER_LEN..];
    let hash = hex::encode(Sha256::digest(content));
    if hash != stored_hash {
        return Err(Error::Model(
            "model file corrupt: content hash mismatch".into(),
        ));
    }
    let content: ModelContent = serde_json::from_slice(content)
        .map_err(|e| Error::Model(format!("malformed model payload: {e}")))?;
    Ok(TrainedModel {
        params: content.params,
        classifier: content.classifier,
        class_order: content.class_order,
        selection_report: content.selection_report,
        version: hash,
        train_seed: content.train_seed,
    })
}

// ---------------------------------------------------------------------------
// Batch prediction
// ---------------------------------------------------------------------------

/// Totals for one batch-prediction run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub total_items: usize,
    pub predicted_items: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub elapsed: Duration,
}

impl fmt::Display for BatchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Total Items: {}", self.total_items)?;
        writeln!(f, "Predicted Items: {}", self.predicted_items)?;
        writeln!(f, "Succeeded: {}", self.succeeded)?;
        writeln!(f, "Failed: {}", self.failed)?;
        write!(f, "Elapsed: {:.3}s", self.elapsed.as_secs_f64())
    }
}

/// Streams a flow CSV through the model, writing one output row per scored
/// record.
///
/// Output columns: `flow_id,source_ip,destination_ip,predicted` plus one
/// `score_<class>` column per class. Header-level problems (unreadable
/// input, a schema missing a required feature) fail before any output file
/// is created. Row-level problems (ragged or unreadable rows) are counted
/// as failures and listed, one `row N: reason` line each, in a
/// `<output>.failures.txt` sidecar written only when failures occurred.
pub fn batch_predict(model: &TrainedModel, input: &Path, output: &Path) -> Result<BatchReport> {
    let start = Instant::now();
    let origin = input.to_string_lossy().into_owned();
    let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(Error::parse(&origin, 1, "missing header row")),
        Some(Err(e)) => return Err(Error::parse(&origin, 1, e.to_string())),
        Some(Ok(h)) => h,
    };
    let map = flows::map_columns(&header, &origin)?;
    let schema = std::sync::Arc::new(FeatureSchema {
        numeric_names: map.numeric.iter().map(|(_, n)| n.clone()).collect(),
    });
    let binding = model.params.bind(&schema)?;

    let out_file = std::fs::File::create(output).map_err(|e| Error::io(output, e))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(out_file));
    let mut out_header = vec![
        "flow_id".to_string(),
        "source_ip".to_string(),
        "destination_ip".to_string(),
        "predicted".to_string(),
    ];
    out_header.extend(model.class_order.iter().map(|c| format!("score_{c}")));
    writer
        .write_record(&out_header)
        .map_err(|e| Error::io(output, std::io::Error::other(e)))?;

    let mut succeeded = 0usize;
    let mut failed = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for (ridx, row) in rows.enumerate() {
        let row_number = ridx + 2;
        let rec = match row {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("row {row_number}: {e}"));
                failed += 1;
                continue;
            }
        };
        if rec.len() != header.len() {
            failures.push(format!(
                "row {row_number}: expected {} columns, found {}",
                header.len(),
                rec.len()
            ));
            failed += 1;
            continue;
        }
        let record = flows::record_from_row(&rec, &map, &schema);
        let x = model.params.apply_bound(&binding, &record);
        let scores = model.classifier.scores(&x);
        let mut out_row = vec![
            record.flow_id.clone().unwrap_or_default(),
            record.source_ip.clone(),
            record.destination_ip.clone(),
            model.class_order[argmax(&scores)].clone(),
        ];
        out_row.extend(scores.iter().map(|s| s.to_string()));
        writer
            .write_record(&out_row)
            .map_err(|e| Error::io(output, std::io::Error::other(e)))?;
        succeeded += 1;
    }
    writer.flush().map_err(|e| Error::io(output, e))?;

    if !failures.is_empty() {
        let mut sidecar = output.as_os_str().to_os_string();
        sidecar.push(".failures.txt");
        let sidecar = std::path::PathBuf::from(sidecar);
        let mut f = std::fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        for line in &failures {
            writeln!(f, "{line}").map_err(|e| Error::io(&sidecar, e))?;
        }
    }

    Ok(BatchReport {
        total_items: succeeded + failed,
        predicted_items: succeeded,
        succeeded,
        failed,
        elapsed: start.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn encode_for_eval(
    params: &PreprocessParams,
    ds: &Dataset,
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let binding = params.bind(&ds.schema)?;
    let mut matrix = Vec::with_capacity(ds.records.len());
    let mut truths = Vec::with_capacity(ds.records.len());
    for (i, r) in ds.records.iter().enumerate() {
        let label = r.label.clone().ok_or_else(|| {
            Error::Schema(format!(
                "record {} has no label; evaluation requires labeled data",
                i + 1
            ))
        })?;
        matrix.push(params.apply_bound(&binding, r));
        truths.push(label);
    }
    Ok((matrix, truths))
}

fn batch_labels(model: &TrainedModel, matrix: &[Vec<f64>]) -> Vec<String> {
    model
        .classifier
        .batch_scores(matrix)
        .iter()
        .map(|s| model.class_order[argmax(s)].clone())
        .collect()
}

/// Permutation feature importance of the model on a labeled dataset: the
/// mean macro-F1 drop per feature when its encoded column is shuffled
/// `repeats` times.
pub fn permutation_importance(
    model: &TrainedModel,
    data: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    let (matrix, truths) = encode_for_eval(&model.params, data)?;
    metrics::permutation_importance(
        &model.class_order,
        &model.params.feature_order,
        &matrix,
        &truths,
        repeats,
        seed,
        |m| batch_labels(model, m),
    )
}

/// Evaluates a model on a labeled dataset: confusion matrix, F1, both AUCs,
/// log loss, and permutation importances.
///
/// Records reach this point only after the dataset-level schema check, so
/// none are dropped here; the report's `dropped` count exists for callers
/// that track unscorable records separately.
pub fn evaluate(
    model: &TrainedModel,
    data: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    let (matrix, truths) = encode_for_eval(&model.params, data)?;
    let score_rows = model.classifier.batch_scores(&matrix);
    let preds: Vec<PredictionResult> = score_rows
        .iter()
        .map(|s| PredictionResult {
            classes: model.class_order.clone(),
            scores: s.clone(),
            predicted: model.class_order[argmax(s)].clone(),
        })
        .collect();
    let cm = metrics::confusion(&preds, &truths, &[])?;
    let f1 = metrics::f1_scores(&cm)?;
    let roc = metrics::roc_auc(&model.class_order, &score_rows, &truths)?;
    let pr = metrics::pr_auc(&model.class_order, &score_rows, &truths)?;
    let ll = metrics::log_loss(&model.class_order, &score_rows, &truths)?;
    let importances = metrics::permutation_importance(
        &model.class_order,
        &model.params.feature_order,
        &matrix,
        &truths,
        repeats,
        seed,
        |m| batch_labels(model, m),
    )?;
    Ok(EvalReport {
        confusion: cm,
        f1_micro: f1.micro,
        f1_macro: f1.macro_,
        roc_auc: roc,
        pr_auc: pr,
        log_loss: ll,
        importances,
        evaluated: truths.len(),
        dropped: 0,
    })
}
