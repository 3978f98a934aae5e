//! k-nearest-neighbour classifier with smoothed vote fractions.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnClassifier {
    pub n_classes: usize,
    /// Requested neighbour count; clamped to the stored point count when
    /// scoring.
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Stores the training matrix verbatim (lazy learner).
pub fn fit(points: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize, k: usize) -> KnnClassifier {
    debug_assert_eq!(points.len(), labels.len());
    debug_assert!(!points.is_empty() && k >= 1);
    KnnClassifier {
        n_classes,
        k,
        points,
        labels,
    }
}

impl KnnClassifier {
    /// Smoothed vote fractions `(votes + 1) / (k + classes)` over the k
    /// nearest stored points by squared euclidean distance. Distance ties
    /// resolve to the lower stored index, so the neighbour set is
    /// deterministic.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let k = self.k.min(self.points.len());
        let mut dists: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d: f64 = p
                    .iter()
                    .zip(row)
                    .map(|(a, b)| {
                        let diff = a - b;
                        diff * diff
                    })
                    .sum();
                (d, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0usize; self.n_classes];
        for (_, i) in &dists[..k] {
            votes[self.labels[*i]] += 1;
        }
        let denom = (k + self.n_classes) as f64;
        votes.iter().map(|&v| (v + 1) as f64 / denom).collect()
    }
}
