//! Evaluation metrics for classifier outputs.
//!
//! All metrics operate on plain slices (per-record class-score vectors plus
//! true labels) so they can be checked independently of any model. Records
//! that produced no prediction ("dropped") are tracked in the confusion
//! matrix but excluded from every score; each metric returns an
//! undefined-metric error instead of a silent NaN when its inputs are
//! degenerate (no predictions, a class with no positives, an empty list).

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::PredictionResult;
use crate::error::{Error, Result};

/// Confusion matrix with an explicit per-class dropped column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Class labels in index order.
    pub classes: Vec<String>,
    /// `counts[t][p]`: records of true class `t` predicted as class `p`.
    pub counts: Vec<Vec<usize>>,
    /// `dropped[t]`: records of true class `t` that produced no prediction.
    pub dropped: Vec<usize>,
}

impl ConfusionMatrix {
    /// Total scored (predicted) records.
    pub fn total(&self) -> usize {
        self.counts
            .iter()
            .map(|row| row.iter().sum::<usize>())
            .sum()
    }

    /// Total records that produced no prediction.
    pub fn dropped_total(&self) -> usize {
        self.dropped.iter().sum()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label_width = self
            .classes
            .iter()
            .map(|c| c.len())
            .chain(["True label".len()])
            .max()
            .unwrap_or(10);
        let col_width = self
            .classes
            .iter()
            .map(|c| c.len().max(7))
            .collect::<Vec<_>>();

        write!(f, "{:<label_width$}", "True label")?;
        for (c, w) in self.classes.iter().zip(&col_width) {
            write!(f, "  {c:>w$}", w = w)?;
        }
        writeln!(f, "  {:>7}", "Dropped")?;
        for (i, c) in self.classes.iter().enumerate() {
            write!(f, "{c:<label_width$}")?;
            for (j, w) in col_width.iter().enumerate() {
                write!(f, "  {:>w$}", self.counts[i][j], w = w)?;
            }
            writeln!(f, "  {:>7}", self.dropped[i])?;
        }
        Ok(())
    }
}

/// Builds a confusion matrix from prediction results and true labels.
///
/// `dropped_truths` carries the true labels of records that could not be
/// scored. The class order comes from the predictions' class list (all
/// predictions must agree); when there are no predictions at all it falls
/// back to the sorted distinct labels seen. True labels outside the class
/// list are a schema error.
pub fn confusion(
    preds: &[PredictionResult],
    truths: &[String],
    dropped_truths: &[String],
) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Metric(format!(
            "{} predictions but {} true labels",
            preds.len(),
            truths.len()
        )));
    }
    let classes: Vec<String> = match preds.first() {
        Some(first) => {
            for p in preds {
                if p.classes != first.classes {
                    return Err(Error::Schema(
                        "predictions disagree on the class list".into(),
                    ));
                }
            }
            first.classes.clone()
        }
        None => truths
            .iter()
            .chain(dropped_truths)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };

    let index = |label: &str| -> Result<usize> {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Schema(format!("label `{label}` is not a known class")))
    };

    let n = classes.len();
    let mut counts = vec![vec![0usize; n]; n];
    let mut dropped = vec![0usize; n];
    for (p, t) in preds.iter().zip(truths) {
        counts[index(t)?][index(&p.predicted)?] += 1;
    }
    for t in dropped_truths {
        dropped[index(t)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes,
        counts,
        dropped,
    })
}

/// Micro/macro F1 derived from a confusion matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    #[serde(rename = "macro")]
    pub macro_: f64,
    /// Per-class F1 in matrix class order.
    pub per_class: Vec<f64>,
}

/// Computes micro- and macro-averaged F1 over the scored records.
///
/// Dropped records do not contribute. A matrix with zero scored records has
/// no defined F1 and errors. A class with neither actual nor predicted
/// members scores 0, keeping the macro average conservative.
pub fn f1_scores(cm: &ConfusionMatrix) -> Result<F1Scores> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Metric(
            "confusion matrix has no scored records; F1 undefined".into(),
        ));
    }
    let n = cm.classes.len();
    let mut per_class = Vec::with_capacity(n);
    let mut tp_sum = 0usize;
    for i in 0..n {
        let tp = cm.counts[i][i];
        let actual: usize = cm.counts[i].iter().sum();
        let predicted: usize = (0..n).map(|t| cm.counts[t][i]).sum();
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if actual > 0 {
            tp as f64 / actual as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(f1);
        tp_sum += tp;
    }
    // With single-label data, pooled precision and recall are both
    // tp_sum / total, so micro-F1 equals accuracy.
    let micro = tp_sum as f64 / total as f64;
    let macro_ = per_class.iter().sum::<f64>() / n as f64;
    Ok(F1Scores {
        micro,
        macro_,
        per_class,
    })
}

fn validate_scores(class_order: &[String], scores: &[Vec<f64>], truths: &[String]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Metric("no records to score".into()));
    }
    if scores.len() != truths.len() {
        return Err(Error::Metric(format!(
            "{} score rows but {} true labels",
            scores.len(),
            truths.len()
        )));
    }
    for (i, row) in scores.iter().enumerate() {
        if row.len() != class_order.len() {
            return Err(Error::Metric(format!(
                "score row {i} has {} entries for {} classes",
                row.len(),
                class_order.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Metric(format!(
                "score row {i} has a non-finite value"
            )));
        }
    }
    for t in truths {
        if !class_order.iter().any(|c| c == t) {
            return Err(Error::Schema(format!("label `{t}` is not a known class")));
        }
    }
    Ok(())
}

/// One-vs-rest AUC for a single class via tie-averaged ranks. Numerator
/// terms are integer halves, so this matches explicit pair counting exactly.
fn roc_auc_one(pos_scores: &[(f64, bool)]) -> f64 {
    let mut items = pos_scores.to_vec();
    items.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    let n_pos = items.iter().filter(|(_, p)| *p).count();
    let n_neg = items.len() - n_pos;
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        while j < items.len() && items[j].0 == items[i].0 {
            j += 1;
        }
        // Tied block occupies ranks i+1..=j; each member gets the average.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &items[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// Macro-averaged one-vs-rest ROC AUC; ties contribute 1/2 per pair.
///
/// Errors if any class lacks positive or negative examples (its curve is
/// undefined).
pub fn roc_auc(class_order: &[String], scores: &[Vec<f64>], truths: &[String]) -> Result<f64> {
    validate_scores(class_order, scores, truths)?;
    let mut sum = 0.0;
    for (ci, class) in class_order.iter().enumerate() {
        let items: Vec<(f64, bool)> = scores
            .iter()
            .zip(truths)
            .map(|(row, t)| (row[ci], t == class))
            .collect();
        let n_pos = items.iter().filter(|(_, p)| *p).count();
        let n_neg = items.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::Metric(format!(
                "class `{class}` needs both positive and negative examples for ROC AUC"
            )));
        }
        sum += roc_auc_one(&items);
    }
    Ok(sum / class_order.len() as f64)
}

/// One-vs-rest average precision for one class (step-summed PR curve).
fn average_precision_one(items: &mut [(f64, bool)], n_pos: usize) -> f64 {
    items.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        let mut group_tp = 0usize;
        let mut group_fp = 0usize;
        while j < items.len() && items[j].0 == items[i].0 {
            if items[j].1 {
                group_tp += 1;
            } else {
                group_fp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        fp += group_fp;
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    ap
}

/// Macro-averaged one-vs-rest PR AUC (average precision, step-summed so tied
/// scores form one step).
///
/// Errors if any class has no positive examples.
pub fn pr_auc(class_order: &[String], scores: &[Vec<f64>], truths: &[String]) -> Result<f64> {
    validate_scores(class_order, scores, truths)?;
    let mut sum = 0.0;
    for (ci, class) in class_order.iter().enumerate() {
        let mut items: Vec<(f64, bool)> = scores
            .iter()
            .zip(truths)
            .map(|(row, t)| (row[ci], t == class))
            .collect();
        let n_pos = items.iter().filter(|(_, p)| *p).count();
        if n_pos == 0 {
            return Err(Error::Metric(format!(
                "class `{class}` has no positive examples for PR AUC"
            )));
        }
        sum += average_precision_one(&mut items, n_pos);
    }
    Ok(sum / class_order.len() as f64)
}

/// Probability clip bound for log loss.
pub const LOG_LOSS_CLIP: f64 = 1e-15;

/// Mean negative log likelihood of the true class, with probabilities
/// clipped into `[1e-15, 1 - 1e-15]`.
pub fn log_loss(class_order: &[String], scores: &[Vec<f64>], truths: &[String]) -> Result<f64> {
    validate_scores(class_order, scores, truths)?;
    let mut sum = 0.0;
    for (row, t) in scores.iter().zip(truths) {
        let ci = class_order.iter().position(|c| c == t).expect("validated");
        let p = row[ci].clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
        sum -= p.ln();
    }
    Ok(sum / scores.len() as f64)
}

/// Importance of one input feature measured by permutation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean macro-F1 drop when the feature's column is shuffled.
    pub mean_drop: f64,
}

/// Full evaluation artefact produced by `detect::evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub f1_micro: f64,
    pub f1_macro: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub log_loss: f64,
    /// Sorted by descending importance, ties by feature name.
    pub importances: Vec<FeatureImportance>,
    /// Records scored / records that failed to score.
    pub evaluated: usize,
    pub dropped: usize,
}

/// Permutation importance over an already-encoded feature matrix.
///
/// `predict_labels` maps a feature matrix to predicted labels (row order
/// preserved). For each feature (column), the column is shuffled `repeats`
/// times and the mean macro-F1 drop against the baseline is recorded. All
/// shuffles come from one seeded stream, consumed feature-major then
/// repeat-minor, so results are reproducible and independent of timing.
pub fn permutation_importance<F>(
    class_order: &[String],
    feature_names: &[String],
    matrix: &[Vec<f64>],
    truths: &[String],
    repeats: usize,
    seed: u64,
    predict_labels: F,
) -> Result<Vec<FeatureImportance>>
where
    F: Fn(&[Vec<f64>]) -> Vec<String>,
{
    if repeats == 0 {
        return Err(Error::Config(
            "permutation repeats must be at least 1".into(),
        ));
    }
    if matrix.is_empty() {
        return Err(Error::Metric(
            "no records for permutation importance".into(),
        ));
    }
    if matrix.len() != truths.len() {
        return Err(Error::Metric(format!(
            "{} rows but {} true labels",
            matrix.len(),
            truths.len()
        )));
    }

    let macro_f1_of =
        |labels: &[String]| -> Result<f64> { macro_f1_from_labels(class_order, labels, truths) };

    let baseline_labels = predict_labels(matrix);
    let baseline = macro_f1_of(&baseline_labels)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = matrix.len();
    let mut importances = Vec::with_capacity(feature_names.len());
    let mut scratch = matrix.to_vec();
    for (j, name) in feature_names.iter().enumerate() {
        let mut drop_sum = 0.0;
        for _ in 0..repeats {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (row, &src) in scratch.iter_mut().zip(&order) {
                row[j] = matrix[src][j];
            }
            let permuted = macro_f1_of(&predict_labels(&scratch))?;
            drop_sum += baseline - permuted;
        }
        // Restore the column before moving on.
        for (row, orig) in scratch.iter_mut().zip(matrix) {
            row[j] = orig[j];
        }
        importances.push(FeatureImportance {
            feature: name.clone(),
            mean_drop: drop_sum / repeats as f64,
        });
    }
    importances.sort_by(|a, b| {
        b.mean_drop
            .partial_cmp(&a.mean_drop)
            .expect("finite drops")
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(importances)
}

/// Macro-F1 straight from label pairs, without materialising prediction
/// score vectors. Used by permutation importance, which rescores many times.
fn macro_f1_from_labels(
    class_order: &[String],
    predicted: &[String],
    truths: &[String],
) -> Result<f64> {
    let index = |label: &str| -> Result<usize> {
        class_order
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Schema(format!("label `{label}` is not a known class")))
    };
    let n = class_order.len();
    let mut counts = vec![vec![0usize; n]; n];
    for (p, t) in predicted.iter().zip(truths) {
        counts[index(t)?][index(p)?] += 1;
    }
    let cm = ConfusionMatrix {
        classes: class_order.to_vec(),
        counts,
        dropped: vec![0; n],
    };
    Ok(f1_scores(&cm)?.macro_)
}
