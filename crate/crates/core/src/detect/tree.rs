//! Decision-tree classifier: binary CART splits chosen by gini impurity.
//!
//! Split search is exhaustive over midpoints between consecutive distinct
//! feature values, found by a sort-and-sweep with incremental class counts.
//! Candidates are scored by total weighted impurity
//! `n_left * gini(left) + n_right * gini(right)`; only a strictly better
//! candidate replaces the current best, so ties resolve to the lowest
//! feature index, then the lowest threshold. A node splits only when the
//! best candidate strictly beats the node's own impurity.

use serde::{Deserialize, Serialize};

/// One tree node. Records with `value <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Laplace-smoothed class proportions `(count + 1) / (n + classes)`,
        /// strictly positive so downstream log loss stays finite.
        scores: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_classes: usize,
    pub root: TreeNode,
}

/// Gini impurity `1 - Σ p_c²` of a class-count vector.
pub fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Fits a tree on an encoded feature matrix.
///
/// `labels` are class indices in `0..n_classes`. Growth stops at `max_depth`,
/// below `2 * min_leaf` records, or on a pure node.
pub fn fit(
    matrix: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
) -> DecisionTree {
    debug_assert_eq!(matrix.len(), labels.len());
    debug_assert!(!matrix.is_empty());
    debug_assert!(n_classes >= 1 && min_leaf >= 1);
    let indices: Vec<usize> = (0..matrix.len()).collect();
    let root = grow(matrix, labels, n_classes, &indices, 0, max_depth, min_leaf);
    DecisionTree { n_classes, root }
}

impl DecisionTree {
    /// Class scores for one encoded record.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { scores } => return scores.clone(),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// The root `(feature, threshold)` split, or `None` if the tree is a
    /// single leaf. Exposed so the split choice can be checked against
    /// exhaustive search.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.root {
            TreeNode::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Maximum depth of the fitted tree (a lone leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

fn class_counts(labels: &[usize], indices: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for &i in indices {
        counts[labels[i]] += 1;
    }
    counts
}

fn leaf_from_counts(counts: &[usize], total: usize) -> TreeNode {
    let denom = (total + counts.len()) as f64;
    TreeNode::Leaf {
        scores: counts.iter().map(|&c| (c + 1) as f64 / denom).collect(),
    }
}

fn grow(
    matrix: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    indices: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> TreeNode {
    let n = indices.len();
    let counts = class_counts(labels, indices, n_classes);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= max_depth || n < 2 * min_leaf || pure {
        return leaf_from_counts(&counts, n);
    }
    match best_split(matrix, labels, n_classes, indices, min_leaf, &counts) {
        None => leaf_from_counts(&counts, n),
        Some((feature, threshold)) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| matrix[i][feature] <= threshold);
            let left = grow(
                matrix,
                labels,
                n_classes,
                &left_idx,
                depth + 1,
                max_depth,
                min_leaf,
            );
            let right = grow(
                matrix,
                labels,
                n_classes,
                &right_idx,
                depth + 1,
                max_depth,
                min_leaf,
            );
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Exhaustive best split by total weighted gini; `None` when no candidate
/// strictly improves on the parent.
fn best_split(
    matrix: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    indices: &[usize],
    min_leaf: usize,
    parent_counts: &[usize],
) -> Option<(usize, f64)> {
    let n = indices.len();
    let parent_cost = n as f64 * gini(parent_counts, n);
    let n_features = matrix[indices[0]].len();
    let mut best: Option<(f64, usize, f64)> = None; // (cost, feature, threshold)
    let mut sorted = indices.to_vec();
    let mut left_counts = vec![0usize; n_classes];
    let mut right_counts = vec![0usize; n_classes];
    // `feature` indexes the inner (column) dimension under a varying row, so
    // the loop cannot iterate `matrix` directly.
    #[allow(clippy::needless_range_loop)]
    for feature in 0..n_features {
        sorted.sort_by(|&a, &b| {
            matrix[a][feature]
                .total_cmp(&matrix[b][feature])
                .then(a.cmp(&b))
        });
        left_counts.fill(0);
        for split_at in 1..n {
            left_counts[labels[sorted[split_at - 1]]] += 1;
            let prev = matrix[sorted[split_at - 1]][feature];
            let cur = matrix[sorted[split_at]][feature];
            if prev == cur || split_at < min_leaf || n - split_at < min_leaf {
                continue;
            }
            for c in 0..n_classes {
                right_counts[c] = parent_counts[c] - left_counts[c];
            }
            let cost = split_at as f64 * gini(&left_counts, split_at)
                + (n - split_at) as f64 * gini(&right_counts, n - split_at);
            if best.is_none_or(|(bc, _, _)| cost < bc) {
                // Midpoint; nudge down if rounding landed on the upper value
                // so the `<=` partition matches the swept counts exactly.
                let mut threshold = (prev + cur) / 2.0;
                if threshold >= cur {
                    threshold = prev;
                }
                best = Some((cost, feature, threshold));
            }
        }
    }
    best.and_then(|(cost, feature, threshold)| (cost < parent_cost).then_some((feature, threshold)))
}
