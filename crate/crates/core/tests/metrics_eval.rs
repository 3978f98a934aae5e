//! Metric oracles: every expected value here was computed by hand (or by an
//! independent brute-force method in the same test) before the metric
//! implementations existed.

use cyberdef_core::detect::PredictionResult;
use cyberdef_core::metrics::{
    confusion, f1_scores, log_loss, permutation_importance, pr_auc, roc_auc, ConfusionMatrix,
};
use cyberdef_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// A prediction over `classes` whose argmax is `predicted`.
fn pred(classes: &[&str], scores: &[f64]) -> PredictionResult {
    let classes = strings(classes);
    let best = scores
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        })
        .0;
    PredictionResult {
        predicted: classes[best].clone(),
        classes,
        scores: scores.to_vec(),
    }
}

fn cm(classes: &[&str], counts: &[&[usize]], dropped: &[usize]) -> ConfusionMatrix {
    ConfusionMatrix {
        classes: strings(classes),
        counts: counts.iter().map(|r| r.to_vec()).collect(),
        dropped: dropped.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Confusion matrix
// ---------------------------------------------------------------------------

#[test]
fn confusion_hand_tally() {
    // truths (A, A, B), predictions (A, B, B).
    let preds = vec![
        pred(&["A", "B"], &[0.9, 0.1]),
        pred(&["A", "B"], &[0.2, 0.8]),
        pred(&["A", "B"], &[0.3, 0.7]),
    ];
    let m = confusion(&preds, &strings(&["A", "A", "B"]), &[]).unwrap();
    assert_eq!(m.classes, strings(&["A", "B"]));
    assert_eq!(m.counts, vec![vec![1, 1], vec![0, 1]]);
    assert_eq!(m.dropped, vec![0, 0]);
    assert_eq!(m.total(), 3);
}

#[test]
fn confusion_empty_inputs_give_all_zero_matrix() {
    let m = confusion(&[], &[], &[]).unwrap();
    assert!(m.classes.is_empty());
    assert_eq!(m.total(), 0);

    // With only dropped records, classes come from the dropped labels.
    let m = confusion(&[], &[], &strings(&["B", "A", "B"])).unwrap();
    assert_eq!(m.classes, strings(&["A", "B"]));
    assert_eq!(m.counts, vec![vec![0, 0], vec![0, 0]]);
    assert_eq!(m.dropped, vec![1, 2]);
    assert_eq!(m.dropped_total(), 3);
}

#[test]
fn confusion_unknown_truth_label_errors() {
    let preds = vec![pred(&["A", "B"], &[0.9, 0.1])];
    let err = confusion(&preds, &strings(&["C"]), &[]).unwrap_err();
    assert!(matches!(err, Error::Schema(_)));
    assert!(err.to_string().contains("`C`"), "got: {err}");
}

#[test]
fn confusion_length_mismatch_errors() {
    let preds = vec![pred(&["A", "B"], &[0.9, 0.1])];
    assert!(matches!(
        confusion(&preds, &strings(&["A", "A"]), &[]),
        Err(Error::Metric(_))
    ));
}

#[test]
fn confusion_display_includes_dropped_column() {
    let m = cm(&["A", "B"], &[&[3, 0], &[1, 2]], &[0, 4]);
    let text = m.to_string();
    assert!(text.contains("Dropped"), "got:\n{text}");
    assert!(text.contains('4'), "got:\n{text}");
}

// ---------------------------------------------------------------------------
// F1
// ---------------------------------------------------------------------------

#[test]
fn f1_balanced_two_class_half() {
    // [[1,1],[1,1]]: each class has P = R = 0.5, so per-class F1 = 0.5;
    // micro = accuracy = 2/4 = 0.5, macro = 0.5.
    let f = f1_scores(&cm(&["A", "B"], &[&[1, 1], &[1, 1]], &[0, 0])).unwrap();
    assert_eq!(f.micro, 0.5);
    assert_eq!(f.macro_, 0.5);
}

#[test]
fn f1_perfect_diagonal_is_one() {
    let f = f1_scores(&cm(&["A", "B"], &[&[3, 0], &[0, 2]], &[0, 0])).unwrap();
    assert_eq!(f.micro, 1.0);
    assert_eq!(f.macro_, 1.0);

    // The headline class balance: a strictly diagonal matrix at those
    // counts still scores exactly 1.
    let f = f1_scores(&cm(
        &["BENIGN", "FTP-Patator", "SSH-Patator"],
        &[&[43166, 0, 0], &[0, 786, 0], &[0, 0, 537]],
        &[0, 0, 0],
    ))
    .unwrap();
    assert_eq!(f.micro, 1.0);
    assert_eq!(f.macro_, 1.0);
    assert_eq!(f.per_class, vec![1.0, 1.0, 1.0]);
}

#[test]
fn f1_all_zero_matrix_errors() {
    let err = f1_scores(&cm(&["A", "B"], &[&[0, 0], &[0, 0]], &[0, 0])).unwrap_err();
    assert!(matches!(err, Error::Metric(_)));
}

#[test]
fn f1_single_predicted_class_oracle() {
    // [[2,0],[3,0]]: class A has P = 2/5, R = 1 → F1 = 4/7; class B has no
    // predictions → F1 = 0. Micro = accuracy = 2/5; macro = 2/7.
    let f = f1_scores(&cm(&["A", "B"], &[&[2, 0], &[3, 0]], &[0, 0])).unwrap();
    assert_eq!(f.micro, 2.0 / 5.0);
    assert!(close(f.per_class[0], 4.0 / 7.0, 1e-12));
    assert_eq!(f.per_class[1], 0.0);
    assert!(close(f.macro_, 2.0 / 7.0, 1e-12));
}

#[test]
fn f1_excludes_dropped_records() {
    // Dropped records are reported in the matrix but do not dilute F1.
    let f = f1_scores(&cm(&["A", "B"], &[&[2, 0], &[0, 2]], &[5, 0])).unwrap();
    assert_eq!(f.micro, 1.0);
    assert_eq!(f.macro_, 1.0);
}

#[test]
fn f1_zero_support_class_contributes_zero_to_macro() {
    // Class C is never true and never predicted: F1 convention 0.
    let f = f1_scores(&cm(
        &["A", "B", "C"],
        &[&[2, 0, 0], &[0, 3, 0], &[0, 0, 0]],
        &[0, 0, 0],
    ))
    .unwrap();
    assert_eq!(f.micro, 1.0);
    assert_eq!(f.per_class, vec![1.0, 1.0, 0.0]);
    assert!(close(f.macro_, 2.0 / 3.0, 1e-12));
}

// ---------------------------------------------------------------------------
// ROC AUC
// ---------------------------------------------------------------------------

/// Binary rows: positive-class score p becomes the vector [p, 1 - p].
fn binary_rows(pos_scores: &[f64]) -> Vec<Vec<f64>> {
    pos_scores.iter().map(|&p| vec![p, 1.0 - p]).collect()
}

#[test]
fn roc_auc_four_record_pair_count_oracle() {
    // Positives score 0.9 and 0.7; negatives 0.8 and 0.6. Of the four
    // positive-negative pairs, three are correctly ordered → AUC = 3/4.
    // The complementary class sees mirrored scores, so the macro average
    // is also 3/4.
    let classes = strings(&["att", "ben"]);
    let rows = binary_rows(&[0.9, 0.8, 0.7, 0.6]);
    let truths = strings(&["att", "ben", "att", "ben"]);
    assert_eq!(roc_auc(&classes, &rows, &truths).unwrap(), 0.75);
}

#[test]
fn roc_auc_tie_counts_half() {
    // Pairs: (0.5 vs 0.5) ties → 1/2; (0.5 vs 0.1), (0.9 vs 0.5),
    // (0.9 vs 0.1) ordered → 1 each. AUC = 3.5/4 = 0.875.
    let classes = strings(&["att", "ben"]);
    let rows = binary_rows(&[0.5, 0.5, 0.9, 0.1]);
    let truths = strings(&["att", "ben", "att", "ben"]);
    assert_eq!(roc_auc(&classes, &rows, &truths).unwrap(), 0.875);
}

#[test]
fn roc_auc_all_identical_scores_is_half() {
    let classes = strings(&["att", "ben"]);
    let rows = binary_rows(&[0.4, 0.4, 0.4, 0.4]);
    let truths = strings(&["att", "ben", "att", "ben"]);
    assert_eq!(roc_auc(&classes, &rows, &truths).unwrap(), 0.5);
}

#[test]
fn roc_auc_single_class_truths_errors() {
    let classes = strings(&["att", "ben"]);
    let rows = binary_rows(&[0.9, 0.8]);
    // Every record is `att`: the first class checked has no negatives and
    // the error names it.
    let err = roc_auc(&classes, &rows, &strings(&["att", "att"])).unwrap_err();
    assert!(matches!(err, Error::Metric(_)));
    assert!(err.to_string().contains("`att`"), "got: {err}");
}

#[test]
fn roc_auc_matches_brute_force_pair_counting() {
    // 200 random instances of at most 12 records with a coarse score grid
    // (to force ties); the rank-based implementation must equal explicit
    // pair counting exactly — both are sums of integer halves.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let classes = strings(&["att", "ben"]);
    for _ in 0..200 {
        let n = rng.random_range(2..=12usize);
        let truths: Vec<String>;
        loop {
            let t: Vec<String> = (0..n)
                .map(|_| {
                    if rng.random::<bool>() {
                        "att".to_string()
                    } else {
                        "ben".to_string()
                    }
                })
                .collect();
            if t.iter().any(|x| x == "att") && t.iter().any(|x| x == "ben") {
                truths = t;
                break;
            }
        }
        let pos: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..=10u32) as f64 / 10.0)
            .collect();
        let rows = binary_rows(&pos);

        // Brute force: for each class, count ordered pairs (ties half).
        let mut total = 0.0;
        for (ci, class) in classes.iter().enumerate() {
            let mut pair_sum = 0.0;
            let mut pairs = 0usize;
            for (i, ti) in truths.iter().enumerate() {
                if ti != class {
                    continue;
                }
                for (j, tj) in truths.iter().enumerate() {
                    if tj == class {
                        continue;
                    }
                    pairs += 1;
                    let (sp, sn) = (rows[i][ci], rows[j][ci]);
                    if sp > sn {
                        pair_sum += 1.0;
                    } else if sp == sn {
                        pair_sum += 0.5;
                    }
                }
            }
            total += pair_sum / pairs as f64;
        }
        let expected = total / classes.len() as f64;
        let got = roc_auc(&classes, &rows, &truths).unwrap();
        assert_eq!(got, expected, "truths {truths:?} scores {pos:?}");
    }
}

// ---------------------------------------------------------------------------
// PR AUC
// ---------------------------------------------------------------------------

#[test]
fn pr_auc_perfect_separation_is_one() {
    let classes = strings(&["att", "ben"]);
    let rows = binary_rows(&[0.9, 0.8, 0.2, 0.1]);
    let truths = strings(&["att", "att", "ben", "ben"]);
    assert_eq!(pr_auc(&classes, &rows, &truths).unwrap(), 1.0);
}

#[test]
fn pr_auc_single_positive_ranked_last() {
    // Both classes share one score column: 0.9, 0.8, 0.7, 0.1. For class
    // `att` the sole positive is the 0.1 record, ranked last among 4, so
    // its only recall step lands at precision 1/4 → AP = 1/4. For class
    // `ben` all three positives outrank the negative → AP = 1.
    // Macro = (1/4 + 1)/2 = 5/8.
    let classes = strings(&["att", "ben"]);
    let rows = vec![
        vec![0.9, 0.9],
        vec![0.8, 0.8],
        vec![0.7, 0.7],
        vec![0.1, 0.1],
    ];
    let truths = strings(&["ben", "ben", "ben", "att"]);
    assert_eq!(pr_auc(&classes, &rows, &truths).unwrap(), 5.0 / 8.0);
}

#[test]
fn pr_auc_rejects_truths_outside_the_class_list() {
    let classes = strings(&["att"]);
    let rows = vec![vec![0.9], vec![0.1]];
    let err = pr_auc(&classes, &rows, &strings(&["ben", "att"])).unwrap_err();
    assert!(matches!(err, Error::Schema(_)));
}

#[test]
fn pr_auc_all_records_positive_is_one() {
    let classes = strings(&["att"]);
    let rows = vec![vec![0.9], vec![0.2], vec![0.5]];
    let truths = strings(&["att", "att", "att"]);
    assert_eq!(pr_auc(&classes, &rows, &truths).unwrap(), 1.0);
}

#[test]
fn pr_auc_tie_group_oracle() {
    // Class `a` scores: positive 0.8, negative 0.8, positive 0.6.
    // Descending groups: {0.8: 1 pos, 1 neg} → recall 1/2, precision 1/2,
    // then {0.6: 1 pos} → recall 1, precision 2/3.
    // AP_a = 1/2·1/2 + 1/2·2/3 = 7/12. Class `b`'s single positive ranks
    // first → AP_b = 1. Macro = (7/12 + 1)/2 = 19/24.
    let classes = strings(&["a", "b"]);
    let rows = vec![vec![0.8, 0.1], vec![0.8, 0.9], vec![0.6, 0.1]];
    let truths = strings(&["a", "b", "a"]);
    assert!(close(
        pr_auc(&classes, &rows, &truths).unwrap(),
        19.0 / 24.0,
        1e-12
    ));
}

#[test]
fn pr_auc_zero_positive_class_errors() {
    let classes = strings(&["att", "ben"]);
    let rows = binary_rows(&[0.9, 0.8]);
    let err = pr_auc(&classes, &rows, &strings(&["ben", "ben"])).unwrap_err();
    assert!(matches!(err, Error::Metric(_)));
    assert!(err.to_string().contains("att"), "got: {err}");
}

// ---------------------------------------------------------------------------
// Log loss
// ---------------------------------------------------------------------------

#[test]
fn log_loss_uniform_three_class_is_ln3() {
    let classes = strings(&["a", "b", "c"]);
    let third = 1.0 / 3.0;
    let rows = vec![vec![third; 3], vec![third; 3]];
    let truths = strings(&["a", "c"]);
    assert!(close(
        log_loss(&classes, &rows, &truths).unwrap(),
        3f64.ln(),
        1e-12
    ));
}

#[test]
fn log_loss_half_and_quarter_oracle() {
    // True-class scores 0.5 and 0.25 → (ln 2 + ln 4)/2.
    let classes = strings(&["a", "b"]);
    let rows = vec![vec![0.5, 0.5], vec![0.25, 0.75]];
    let truths = strings(&["a", "a"]);
    let expected = (2f64.ln() + 4f64.ln()) / 2.0;
    assert!(close(
        log_loss(&classes, &rows, &truths).unwrap(),
        expected,
        1e-12
    ));
}

#[test]
fn log_loss_clipping_bounds() {
    let classes = strings(&["a", "b"]);
    // Perfect confidence clips to 1 - 1e-15: loss ≈ 1e-15, far below 1e-12.
    let loss = log_loss(&classes, &[vec![1.0, 0.0]], &strings(&["a"])).unwrap();
    assert!((0.0..1e-12).contains(&loss), "got {loss}");
    // Zero on the true class clips to 1e-15: loss = -ln(1e-15).
    let loss = log_loss(&classes, &[vec![0.0, 1.0]], &strings(&["a"])).unwrap();
    assert!(close(loss, -(1e-15f64).ln(), 1e-9), "got {loss}");
}

#[test]
fn log_loss_empty_errors() {
    let classes = strings(&["a", "b"]);
    assert!(matches!(
        log_loss(&classes, &[], &[]),
        Err(Error::Metric(_))
    ));
}

// ---------------------------------------------------------------------------
// Permutation importance (generic engine)
// ---------------------------------------------------------------------------

/// 20 rows where column 0 is the class and column 1 is constant; the
/// "model" thresholds column 0.
fn importance_fixture() -> (Vec<Vec<f64>>, Vec<String>) {
    let mut matrix = Vec::new();
    let mut truths = Vec::new();
    for i in 0..20 {
        let class = i % 2;
        matrix.push(vec![class as f64, 7.0]);
        truths.push(if class == 0 {
            "A".to_string()
        } else {
            "B".to_string()
        });
    }
    (matrix, truths)
}

fn threshold_predictor(matrix: &[Vec<f64>]) -> Vec<String> {
    matrix
        .iter()
        .map(|r| {
            if r[0] <= 0.5 {
                "A".to_string()
            } else {
                "B".to_string()
            }
        })
        .collect()
}

#[test]
fn importance_ranks_informative_feature_first_and_constant_exactly_zero() {
    let (matrix, truths) = importance_fixture();
    let classes = strings(&["A", "B"]);
    let features = strings(&["signal", "constant"]);
    let ranked = permutation_importance(
        &classes,
        &features,
        &matrix,
        &truths,
        5,
        9,
        threshold_predictor,
    )
    .unwrap();
    assert_eq!(ranked[0].feature, "signal");
    assert!(ranked[0].mean_drop > 0.0, "got {:?}", ranked);
    // Shuffling a constant column is the identity: the drop is exactly 0.
    assert_eq!(ranked[1].feature, "constant");
    assert_eq!(ranked[1].mean_drop, 0.0);
}

#[test]
fn importance_is_deterministic_per_seed() {
    let (matrix, truths) = importance_fixture();
    let classes = strings(&["A", "B"]);
    let features = strings(&["signal", "constant"]);
    let run = |seed| {
        permutation_importance(
            &classes,
            &features,
            &matrix,
            &truths,
            3,
            seed,
            threshold_predictor,
        )
        .unwrap()
    };
    assert_eq!(run(4), run(4));
}

#[test]
fn importance_rejects_zero_repeats() {
    let (matrix, truths) = importance_fixture();
    let err = permutation_importance(
        &strings(&["A", "B"]),
        &strings(&["signal", "constant"]),
        &matrix,
        &truths,
        0,
        1,
        threshold_predictor,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
