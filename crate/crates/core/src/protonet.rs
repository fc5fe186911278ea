//! Nearest-prototype classification and evaluation metrics.
//!
//! Prototypes are per-class means of support embeddings (kept as-is, not
//! re-normalized). Queries are classified by smallest squared Euclidean
//! distance; confidence is the softmax of negative squared distances.

use serde::{Deserialize, Serialize};

use crate::encoder::Embedding;
use crate::error::{CoreError, Result};

/// Class centers in embedding space.
#[derive(Debug, Clone)]
pub struct PrototypeSet {
    /// Row k is the center of `class_ids[k]`.
    pub centers: Vec<Vec<f64>>,
    pub class_ids: Vec<usize>,
}

/// A classification outcome: winning class index (into the prototype set)
/// and its softmax confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub confidence: f64,
}

/// Per-class mean of support embeddings.
pub fn compute_prototypes(support: &[(Embedding, usize)]) -> Result<PrototypeSet> {
    if support.is_empty() {
        return Err(CoreError::parameter("support set is empty"));
    }
    let dim = support[0].0.dim();
    let mut class_ids: Vec<usize> = support.iter().map(|(_, c)| *c).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    let mut centers = vec![vec![0.0f64; dim]; class_ids.len()];
    let mut counts = vec![0usize; class_ids.len()];
    for (e, c) in support {
        if e.dim() != dim {
            return Err(CoreError::dimension("support embeddings have mixed dimensions"));
        }
        let k = class_ids.binary_search(c).unwrap();
        for (acc, v) in centers[k].iter_mut().zip(&e.vector) {
            *acc += v;
        }
        counts[k] += 1;
    }
    for (center, n) in centers.iter_mut().zip(&counts) {
        for v in center.iter_mut() {
            *v /= *n as f64;
        }
    }
    Ok(PrototypeSet { centers, class_ids })
}

/// Nearest-prototype decision with softmax confidence over negative squared
/// distances; ties break toward the lowest class index.
pub fn classify(query: &Embedding, protos: &PrototypeSet) -> Result<Prediction> {
    if protos.centers.is_empty() {
        return Err(CoreError::parameter("prototype set is empty"));
    }
    let d2: Vec<f64> = protos
        .centers
        .iter()
        .map(|c| {
            if c.len() != query.dim() {
                return Err(CoreError::dimension("query/prototype dimension mismatch"));
            }
            Ok(query.vector.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        })
        .collect::<Result<_>>()?;
    let mut best = 0usize;
    for (k, &d) in d2.iter().enumerate() {
        if d < d2[best] {
            best = k;
        }
    }
    // Max-stabilized softmax of -d^2.
    let max_neg = -d2[best];
    let exps: Vec<f64> = d2.iter().map(|&d| (-d - max_neg).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(Prediction { class_index: best, confidence: exps[best] / total })
}

/// Evaluation summary over a labeled query set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
}

/// Accuracy, per-class F1 (0/0 counted as 0), macro-F1, and the confusion
/// matrix `confusion[truth][predicted]`.
pub fn evaluate(predictions: &[usize], truths: &[usize], num_classes: usize) -> Result<Metrics> {
    if predictions.len() != truths.len() {
        return Err(CoreError::dimension("prediction/truth length mismatch"));
    }
    if predictions.is_empty() {
        return Err(CoreError::parameter("nothing to evaluate"));
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= num_classes || t >= num_classes {
            return Err(CoreError::parameter("class index out of range"));
        }
        confusion[t][p] += 1;
    }
    let correct: u64 = (0..num_classes).map(|k| confusion[k][k]).sum();
    let accuracy = correct as f64 / predictions.len() as f64;
    let mut per_class_f1 = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let tp = confusion[k][k] as f64;
        let fp: f64 = (0..num_classes).filter(|&t| t != k).map(|t| confusion[t][k] as f64).sum();
        let f_n: f64 = (0..num_classes).filter(|&p| p != k).map(|p| confusion[k][p] as f64).sum();
        let denom = 2.0 * tp + fp + f_n;
        per_class_f1.push(if denom == 0.0 { 0.0 } else { 2.0 * tp / denom });
    }
    let macro_f1 = per_class_f1.iter().sum::<f64>() / num_classes as f64;
    Ok(Metrics { accuracy, macro_f1, per_class_f1, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn emb(v: &[f64]) -> Embedding {
        Embedding { vector: v.to_vec() }
    }

    #[test]
    fn single_support_vector_is_its_own_center() {
        let s = vec![(emb(&[1.0, 0.0]), 3), (emb(&[0.0, 1.0]), 7)];
        let p = compute_prototypes(&s).unwrap();
        assert_eq!(p.class_ids, vec![3, 7]);
        assert_eq!(p.centers[0], vec![1.0, 0.0]);
        assert_eq!(p.centers[1], vec![0.0, 1.0]);
    }

    #[test]
    fn antipodal_support_gives_zero_center() {
        let s = vec![
            (emb(&[1.0, 0.0]), 0),
            (emb(&[-1.0, 0.0]), 0),
            (emb(&[0.0, 1.0]), 1),
        ];
        let p = compute_prototypes(&s).unwrap();
        assert_eq!(p.centers[0], vec![0.0, 0.0]);
        let pred = classify(&emb(&[0.0, -1.0]), &p).unwrap();
        assert_eq!(pred.class_index, 0);
    }

    #[test]
    fn centers_match_direct_average() {
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 33) as f64 / (1u64 << 31) as f64 - 0.5
        };
        let support: Vec<(Embedding, usize)> = (0..30)
            .map(|i| (emb(&[next(), next(), next()]), i % 3))
            .collect();
        let p = compute_prototypes(&support).unwrap();
        for (k, &class) in p.class_ids.iter().enumerate() {
            let members: Vec<&Embedding> =
                support.iter().filter(|(_, c)| *c == class).map(|(e, _)| e).collect();
            for d in 0..3 {
                let mean: f64 =
                    members.iter().map(|e| e.vector[d]).sum::<f64>() / members.len() as f64;
                assert_abs_diff_eq!(p.centers[k][d], mean, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn query_at_prototype_wins() {
        let p = PrototypeSet {
            centers: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            class_ids: vec![0, 1],
        };
        let pred = classify(&emb(&[1.0, 0.0]), &p).unwrap();
        assert_eq!(pred.class_index, 0);
        assert!(pred.confidence > 0.5);
    }

    #[test]
    fn single_prototype_confidence_is_one() {
        let p = PrototypeSet { centers: vec![vec![0.3, 0.4]], class_ids: vec![5] };
        let pred = classify(&emb(&[10.0, -4.0]), &p).unwrap();
        assert_eq!(pred.class_index, 0);
        assert_eq!(pred.confidence, 1.0);
    }

    #[test]
    fn equidistant_tie_breaks_low_with_half_confidence() {
        let p = PrototypeSet {
            centers: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            class_ids: vec![0, 1],
        };
        let pred = classify(&emb(&[0.0, 2.0]), &p).unwrap();
        assert_eq!(pred.class_index, 0);
        assert_abs_diff_eq!(pred.confidence, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_large_distances() {
        let p = PrototypeSet {
            centers: vec![vec![0.0, 0.0], vec![100.0, 0.0]],
            class_ids: vec![0, 1],
        };
        let pred = classify(&emb(&[0.0, 0.0]), &p).unwrap();
        assert_eq!(pred.class_index, 0);
        assert!(pred.confidence > 0.999999 && pred.confidence <= 1.0);
    }

    #[test]
    fn all_correct_metrics() {
        let preds = vec![0, 1, 2, 0, 1, 2];
        let m = evaluate(&preds, &preds, 3).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        for (t, row) in m.confusion.iter().enumerate() {
            for (p, &v) in row.iter().enumerate() {
                assert_eq!(v, if t == p { 2 } else { 0 });
            }
        }
    }

    #[test]
    fn binary_case_hand_computed() {
        // Truth:      0 0 1 1
        // Predicted:  0 1 0 1  -> class 0: TP=1, FP=1, FN=1 -> F1 = 0.5
        let m = evaluate(&[0, 1, 0, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_abs_diff_eq!(m.per_class_f1[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.per_class_f1[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn absent_class_scores_zero_f1() {
        // Class 2 never appears in truth or predictions: precision and
        // recall are 0/0, defined as 0.
        let m = evaluate(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(m.per_class_f1[2], 0.0);
        assert_abs_diff_eq!(m.macro_f1, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn confusion_row_sums_are_truth_counts() {
        let truths = vec![0, 0, 0, 1, 1, 2];
        let preds = vec![0, 1, 2, 1, 1, 0];
        let m = evaluate(&preds, &truths, 3).unwrap();
        let rows: Vec<u64> = m.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(rows, vec![3, 2, 1]);
    }

    #[test]
    fn large_balanced_confusion_reproduces_reported_off_diagonals() {
        // 11 classes, 500 queries each; classes 0 and 9 exchange 56 and 29
        // errors respectively, everything else correct.
        let mut truths = Vec::new();
        let mut preds = Vec::new();
        for class in 0..11usize {
            for i in 0..500usize {
                truths.push(class);
                let p = match (class, i) {
                    (0, i) if i < 56 => 9,
                    (9, i) if i < 29 => 0,
                    _ => class,
                };
                preds.push(p);
            }
        }
        let m = evaluate(&preds, &truths, 11).unwrap();
        assert_eq!(m.confusion[0][9], 56);
        assert_eq!(m.confusion[9][0], 29);
        assert_abs_diff_eq!(m.accuracy, 1.0 - 85.0 / 5500.0, epsilon = 1e-12);
        assert!(m.macro_f1 > 0.97);
    }

    #[test]
    fn evaluate_rejects_mismatched_lengths() {
        assert!(evaluate(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn metrics_serialize_to_json() {
        let m = evaluate(&[0, 1], &[0, 1], 2).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"accuracy\":1.0"));
        assert!(json.contains("macro_f1"));
        let back: Metrics = serde_json::from_str(&json).unwrap();
        assert_eq!(back.confusion, m.confusion);
    }
}
