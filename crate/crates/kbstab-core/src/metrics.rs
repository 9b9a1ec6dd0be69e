//! Binary classification metrics shared by the criterion evaluation, the
//! property filters and the change predictor.

use std::collections::BTreeMap;

/// Precision / recall / F1 plus the underlying confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// Per-label support of the gold data (label text -> count).
    pub support: BTreeMap<String, usize>,
    /// Full confusion counts keyed by (gold label, predicted label).
    pub confusion: BTreeMap<(String, String), usize>,
}

impl Metrics {
    /// Compute binary metrics from aligned (gold, predicted) flags, where
    /// `true` is the positive class.
    pub fn from_binary(pairs: &[(bool, bool)]) -> Metrics {
        let mut tp = 0;
        let mut fp = 0;
        let mut tn = 0;
        let mut fn_ = 0;
        for &(gold, pred) in pairs {
            match (gold, pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let accuracy = ratio(tp + tn, pairs.len());
        let mut support = BTreeMap::new();
        support.insert("positive".to_string(), tp + fn_);
        support.insert("negative".to_string(), fp + tn);
        Metrics {
            precision,
            recall,
            f1,
            accuracy,
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            support,
            confusion: BTreeMap::new(),
        }
    }

    /// Metrics over labelled pairs: binary scores treat `positive_label` as
    /// the positive class; the full label-by-label confusion matrix and
    /// per-label support are retained.
    pub fn from_labels(pairs: &[(String, String)], positive_label: &str) -> Metrics {
        let flags: Vec<(bool, bool)> = pairs
            .iter()
            .map(|(g, p)| (g == positive_label, p == positive_label))
            .collect();
        let mut m = Metrics::from_binary(&flags);
        m.support.clear();
        for (gold, pred) in pairs {
            *m.support.entry(gold.clone()).or_insert(0) += 1;
            *m.confusion.entry((gold.clone(), pred.clone())).or_insert(0) += 1;
        }
        m
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
