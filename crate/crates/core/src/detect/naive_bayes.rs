//! Gaussian naive Bayes with a variance floor.

use serde::{Deserialize, Serialize};

/// Variance floor keeping the Gaussian likelihood finite on near-constant
/// features.
pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub n_classes: usize,
    pub log_priors: Vec<f64>,
    /// Per-class per-feature means, `means[class][feature]`.
    pub means: Vec<Vec<f64>>,
    /// Per-class per-feature population variances, floored.
    pub variances: Vec<Vec<f64>>,
}

/// Fits per-class Gaussians. Every class index in `0..n_classes` must have
/// at least one row.
pub fn fit(matrix: &[Vec<f64>], labels: &[usize], n_classes: usize) -> GaussianNb {
    debug_assert_eq!(matrix.len(), labels.len());
    debug_assert!(!matrix.is_empty());
    let n_features = matrix[0].len();
    let n = matrix.len() as f64;

    let mut counts = vec![0usize; n_classes];
    let mut sums = vec![vec![0.0f64; n_features]; n_classes];
    for (row, &c) in matrix.iter().zip(labels) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    debug_assert!(
        counts.iter().all(|&c| c > 0),
        "empty class in naive Bayes fit"
    );

    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
        .collect();

    let mut sq_dev = vec![vec![0.0f64; n_features]; n_classes];
    for (row, &c) in matrix.iter().zip(labels) {
        for (acc, (v, m)) in sq_dev[c].iter_mut().zip(row.iter().zip(&means[c])) {
            let d = v - m;
            *acc += d * d;
        }
    }
    let variances: Vec<Vec<f64>> = sq_dev
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            s.iter()
                .map(|v| (v / c as f64).max(VARIANCE_FLOOR))
                .collect()
        })
        .collect();

    let log_priors = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
    GaussianNb {
        n_classes,
        log_priors,
        means,
        variances,
    }
}

impl GaussianNb {
    /// Posterior class probabilities via log-space accumulation and softmax
    /// normalization.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut log_post = Vec::with_capacity(self.n_classes);
        for c in 0..self.n_classes {
            let mut lp = self.log_priors[c];
            for ((v, m), var) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                let d = v - m;
                lp += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var);
            }
            log_post.push(lp);
        }
        let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut scores: Vec<f64> = log_post.iter().map(|lp| (lp - max).exp()).collect();
        let sum: f64 = scores.iter().sum();
        for s in &mut scores {
            *s /= sum;
        }
        scores
    }
}
