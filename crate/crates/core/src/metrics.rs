//! Classification metrics: accuracy and macro-averaged F1.

use ndarray::ArrayView2;

use crate::data::LabelData;
use crate::error::{Error, Result};

/// Argmax prediction per row; ties go to the lowest class index.
pub fn predictions(y_hat: ArrayView2<f64>) -> Vec<usize> {
    y_hat
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_value = row[0];
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > best_value {
                    best = k;
                    best_value = v;
                }
            }
            best
        })
        .collect()
}

/// Fraction of masked nodes whose prediction matches the label.
pub fn accuracy(predicted: &[usize], labels: &LabelData, mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::validation("accuracy over an empty mask is undefined"));
    }
    let mut correct = 0usize;
    for &node in mask {
        let truth = labels
            .label_of(node)
            .ok_or_else(|| Error::validation(format!("node {node} in mask has no label")))?;
        if predicted[node] == truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / mask.len() as f64)
}

/// Per-class F1 over the masked nodes, for all `n_classes` classes.
/// A class with `precision + recall = 0` scores 0.
pub fn per_class_f1(
    predicted: &[usize],
    labels: &LabelData,
    mask: &[usize],
) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Err(Error::validation("F1 over an empty mask is undefined"));
    }
    let k = labels.n_classes();
    let mut true_pos = vec![0usize; k];
    let mut false_pos = vec![0usize; k];
    let mut false_neg = vec![0usize; k];
    for &node in mask {
        let truth = labels
            .label_of(node)
            .ok_or_else(|| Error::validation(format!("node {node} in mask has no label")))?;
        let guess = predicted[node];
        if guess == truth {
            true_pos[truth] += 1;
        } else {
            false_pos[guess] += 1;
            false_neg[truth] += 1;
        }
    }
    Ok((0..k)
        .map(|class| {
            let tp = true_pos[class] as f64;
            let precision_den = tp + false_pos[class] as f64;
            let recall_den = tp + false_neg[class] as f64;
            let precision = if precision_den > 0.0 {
                tp / precision_den
            } else {
                0.0
            };
            let recall = if recall_den > 0.0 { tp / recall_den } else { 0.0 };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .collect())
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(predicted: &[usize], labels: &LabelData, mask: &[usize]) -> Result<f64> {
    let scores = per_class_f1(predicted, labels, mask)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
