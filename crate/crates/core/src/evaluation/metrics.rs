//! Classification metrics with AI as the positive class.

use serde::{Deserialize, Serialize};

use crate::classifier::Prediction;
use crate::error::{Error, Result};
use crate::record::Target;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub f1_ai: f64,
    pub f1_macro: f64,
    /// Absent when only one class is present in the labels.
    pub auc: Option<f64>,
}

/// F1 from counts; 1.0 when the class never occurs and is never predicted.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let d = 2 * tp + fp + fn_;
    if d == 0 {
        1.0
    } else {
        2.0 * tp as f64 / d as f64
    }
}

/// Area under the ROC curve via the rank-sum statistic with midranks for ties.
pub fn auc(scores: &[f64], labels: &[Target]) -> Option<f64> {
    let n_pos = labels.iter().filter(|l| l.is_ai()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k].is_ai()).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

pub fn metrics_from_scores(predicted: &[Target], prob_ai: &[f64], labels: &[Target]) -> Result<Metrics> {
    if labels.is_empty() || predicted.len() != labels.len() || prob_ai.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "need equally many predictions ({}) and labels ({}), at least one",
            predicted.len(),
            labels.len()
        )));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (p, l) in predicted.iter().zip(labels) {
        match (p.is_ai(), l.is_ai()) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = labels.len();
    let f1_ai = f1(tp, fp, fn_);
    let f1_human = f1(tn, fn_, fp);
    Ok(Metrics {
        n,
        tp,
        tn,
        fp,
        fn_,
        accuracy: (tp + tn) as f64 / n as f64,
        f1_ai,
        f1_macro: 0.5 * (f1_ai + f1_human),
        auc: auc(prob_ai, labels),
    })
}

pub fn compute_metrics(predictions: &[Prediction], labels: &[Target]) -> Result<Metrics> {
    let predicted: Vec<Target> = predictions.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.prob_ai).collect();
    metrics_from_scores(&predicted, &scores, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Target::{Ai, Human};

    #[test]
    fn confusion_example() {
        let mut pred = Vec::new();
        let mut lab = Vec::new();
        for (p, l, k) in [(Ai, Ai, 40), (Human, Human, 44), (Ai, Human, 6), (Human, Ai, 4)] {
            for _ in 0..k {
                pred.push(p);
                lab.push(l);
            }
        }
        let scores: Vec<f64> = pred.iter().map(|p| p.index() as f64).collect();
        let m = metrics_from_scores(&pred, &scores, &lab).unwrap();
        assert_eq!(m.n, 94);
        assert_eq!(m.accuracy, 84.0 / 94.0);
        assert_eq!(m.f1_ai, 80.0 / 90.0);
    }

    #[test]
    fn auc_extremes() {
        let labels = [Human, Human, Ai, Ai];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels), Some(1.0));
        assert_eq!(auc(&[0.5; 4], &labels), Some(0.5));
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &labels), Some(0.0));
        assert_eq!(auc(&[0.5, 0.5], &[Ai, Ai]), None);
    }

    #[test]
    fn all_correct() {
        let labels = [Human, Ai, Ai];
        let m = metrics_from_scores(&labels, &[0.0, 1.0, 1.0], &labels).unwrap();
        assert_eq!((m.accuracy, m.f1_ai, m.f1_macro, m.auc), (1.0, 1.0, 1.0, Some(1.0)));
    }

    #[test]
    fn mismatched_lengths_fail() {
        assert!(metrics_from_scores(&[Ai], &[1.0], &[]).is_err());
        assert!(metrics_from_scores(&[], &[], &[]).is_err());
    }
}
