use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub roc_auc: f64,
    pub avg_precision: f64,
    pub dice: f64,
}

fn masked(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<Vec<(f64, bool)>> {
    if pred.len() != labels.len() || pred.len() != mask.len() {
        return Err(shape_err("prediction, labels and mask differ in size"));
    }
    let v: Vec<(f64, bool)> = pred.iter().zip(labels).zip(mask).filter(|(_, &m)| m).map(|((&p, &y), _)| (p, y >= 0.5)).collect();
    if v.is_empty() {
        return Err(invalid("metric mask is empty"));
    }
    Ok(v)
}

fn class_counts(v: &[(f64, bool)]) -> Result<(usize, usize)> {
    let pos = v.iter().filter(|(_, y)| *y).count();
    let neg = v.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// ROC AUC via the Mann-Whitney rank statistic with averaged tie ranks.
pub fn roc_auc(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<f64> {
    let mut v = masked(pred, labels, mask)?;
    let (pos, neg) = class_counts(&v)?;
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        rank_sum += avg * v[i..j].iter().filter(|(_, y)| *y).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision, `sum_k (R_k - R_{k-1}) P_k` over descending distinct
/// score thresholds.
pub fn average_precision(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<f64> {
    let mut v = masked(pred, labels, mask)?;
    let (pos, _) = class_counts(&v)?;
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp, mut prev_recall, mut ap) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            if v[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Dice of the `p >= 0.5` segmentation; 1 when both sets are empty.
pub fn dice(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<f64> {
    let v = masked(pred, labels, mask)?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (p, y) in v {
        match (p >= 0.5, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let den = 2 * tp + fp + fneg;
    Ok(if den == 0 { 1.0 } else { 2.0 * tp as f64 / den as f64 })
}

pub fn metrics(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<Metrics> {
    Ok(Metrics { roc_auc: roc_auc(pred, labels, mask)?, avg_precision: average_precision(pred, labels, mask)?, dice: dice(pred, labels, mask)? })
}
