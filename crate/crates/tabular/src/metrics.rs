//! Evaluation metrics and the ordered name→value report they produce.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TabularError};
use crate::learn::ModelArtifact;
use crate::table::{Column, Table};

/// Ordered metric name → value pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.entries.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.entries.iter().map(|(k, v)| format!("'{k}': {v}")).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

pub fn accuracy<T: PartialEq>(truth: &[T], pred: &[T]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Macro-averaged F1 over `n_classes`; the binary case scores class 1 only.
pub fn f1(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let per_class = |c: usize| {
        let tp = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        }
    };
    if n_classes == 2 {
        per_class(1)
    } else {
        (0..n_classes).map(per_class).sum::<f64>() / n_classes.max(1) as f64
    }
}

/// Area under the ROC curve via the rank-sum statistic; tied scores share
/// average ranks. `None` when only one class is present.
pub fn roc_auc(positive: &[bool], score: &[f64]) -> Option<f64> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let mut ranks = vec![0.0; score.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && score[idx[j + 1]] == score[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let rank_sum: f64 = positive.iter().zip(&ranks).filter(|(p, _)| **p).map(|(_, r)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> f64 {
    (truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / truth.len().max(1) as f64).sqrt()
}

pub fn mae(truth: &[f64], pred: &[f64]) -> f64 {
    truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / truth.len().max(1) as f64
}

/// Root mean squared log error; negative values are clipped to zero.
pub fn rmsle(truth: &[f64], pred: &[f64]) -> f64 {
    let t: Vec<f64> = truth.iter().map(|v| v.max(0.0).ln_1p()).collect();
    let p: Vec<f64> = pred.iter().map(|v| v.max(0.0).ln_1p()).collect();
    rmse(&t, &p)
}

/// Coefficient of determination; 0 when the truth is constant.
pub fn r2(truth: &[f64], pred: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len().max(1) as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Score `model` on `(x, y)`: accuracy, f1 and (binary) auc for
/// classifiers; rmse, mae and r2 for regressors.
pub fn evaluate(model: &ModelArtifact, x: &Table, y: &Column) -> Result<MetricsReport> {
    if y.len() != x.n_rows() {
        return Err(TabularError::LengthMismatch { expected: x.n_rows(), got: y.len() });
    }
    if y.data.missing_count() > 0 {
        return Err(TabularError::TargetMissingValues);
    }
    let mut report = MetricsReport::default();
    if model.is_classifier() {
        let scores = model.predict_scores(x)?;
        let keys: Vec<String> = model.classes.iter().map(|c| c.render()).collect();
        let truth: Vec<usize> = y
            .data
            .to_strings()
            .into_iter()
            .map(|s| {
                let s = s.expect("checked for missing");
                keys.iter().position(|k| *k == s).unwrap_or(usize::MAX)
            })
            .collect();
        let pred: Vec<usize> = scores
            .iter()
            .map(|p| p.iter().enumerate().fold(0, |b, (i, v)| if *v > p[b] { i } else { b }))
            .collect();
        report.push("accuracy", accuracy(&truth, &pred));
        report.push("f1", f1(&truth, &pred, keys.len()));
        if keys.len() == 2 {
            let pos: Vec<bool> = truth.iter().map(|t| *t == 1).collect();
            let s: Vec<f64> = scores.iter().map(|p| p[1]).collect();
            if let Some(auc) = roc_auc(&pos, &s) {
                report.push("auc", auc);
            }
        }
    } else {
        let truth: Vec<f64> = y
            .data
            .to_f64()
            .ok_or_else(|| TabularError::NonNumericFeatures(vec![y.name.clone()]))?
            .into_iter()
            .map(|v| v.unwrap_or(0.0))
            .collect();
        let pred: Vec<f64> = model.predict_scores(x)?.into_iter().map(|p| p[0]).collect();
        report.push("rmse", rmse(&truth, &pred));
        report.push("mae", mae(&truth, &pred));
        report.push("r2", r2(&truth, &pred));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_two_thirds() {
        assert!((accuracy(&[1, 1, 1], &[1, 0, 1]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_matches_pair_count() {
        let pos = [true, false, true, false];
        let s = [0.9, 0.8, 0.3, 0.1];
        // positive/negative pairs ordered correctly: (0.9,0.8) (0.9,0.1) (0.3,0.1) of 4
        assert_eq!(roc_auc(&pos, &s), Some(0.75));
        assert_eq!(roc_auc(&[true, true], &[0.1, 0.2]), None);
    }

    #[test]
    fn regression_metrics_on_perfect_fit() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(rmse(&t, &t), 0.0);
        assert_eq!(mae(&t, &t), 0.0);
        assert_eq!(r2(&t, &t), 1.0);
        assert_eq!(rmsle(&t, &t), 0.0);
    }

    #[test]
    fn f1_binary_and_macro() {
        assert!((f1(&[1, 0, 1, 1], &[1, 1, 0, 1], 2) - 2.0 / 3.0).abs() < 1e-12);
        assert!((f1(&[0, 1, 2], &[0, 1, 2], 3) - 1.0).abs() < 1e-12);
    }
}
