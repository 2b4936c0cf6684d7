//! Binary classification metrics. The positive class is "suspicious".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Contract(format!("score {i} is NaN")));
    }
    Ok(())
}

/// A score at or above `threshold` predicts positive.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionMatrix> {
    check_inputs(scores, labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (y, s >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Micro-averaged F1 over both classes. Each record is predicted as exactly
/// one class, so pooled precision and recall both equal accuracy and so
/// does their harmonic mean.
pub fn micro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::UndefinedMetric("micro F1 of an empty confusion matrix".into()));
    }
    // Per class: positive (tp, fp, fn) and negative (tn, fn, fp).
    let tp = (cm.tp + cm.tn) as f64;
    let fp = (cm.fp + cm.fn_) as f64;
    let fn_ = (cm.fn_ + cm.fp) as f64;
    let p = tp / (tp + fp);
    let r = tp / (tp + fn_);
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::UndefinedMetric("accuracy of an empty confusion matrix".into()));
    }
    Ok((cm.tp + cm.tn) as f64 / cm.total() as f64)
}

pub fn precision(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.tp + cm.fp {
        0 => Err(Error::UndefinedMetric("precision with no positive predictions".into())),
        d => Ok(cm.tp as f64 / d as f64),
    }
}

pub fn recall(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.tp + cm.fn_ {
        0 => Err(Error::UndefinedMetric("recall with no positive records".into())),
        d => Ok(cm.tp as f64 / d as f64),
    }
}

fn class_counts(labels: &[bool], metric: &str) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{metric} needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score, grouped by equal score.
fn descending_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Average precision: the recall gained at each distinct score, weighted by
/// the precision at that score. Tied scores enter together.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let (pos, _) = class_counts(labels, "PR-AUC")?;
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for g in descending_groups(scores) {
        let gain = g.iter().filter(|&&i| labels[i]).count();
        tp += gain;
        seen += g.len();
        ap += gain as f64 / pos as f64 * (tp as f64 / seen as f64);
    }
    Ok(ap)
}

/// Area under the ROC curve as the Mann-Whitney statistic, with ties
/// counted as one half, via midranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let (pos, neg) = class_counts(labels, "ROC-AUC")?;
    let mut rank_sum = 0.0;
    let mut below = 0usize;
    for g in descending_groups(scores).into_iter().rev() {
        let midrank = below as f64 + (g.len() as f64 + 1.0) / 2.0;
        rank_sum += midrank * g.iter().filter(|&&i| labels[i]).count() as f64;
        below += g.len();
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall with the threshold set at every distinct score, from
/// the highest down.
pub fn threshold_sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<SweepPoint>> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 {
        return Err(Error::UndefinedMetric("recall sweep with no positive records".into()));
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    Ok(descending_groups(scores)
        .into_iter()
        .map(|g| {
            tp += g.iter().filter(|&&i| labels[i]).count();
            seen += g.len();
            SweepPoint {
                threshold: scores[g[0]],
                precision: tp as f64 / seen as f64,
                recall: tp as f64 / pos as f64,
            }
        })
        .collect())
}

/// Scores and labels that reproduce a given confusion matrix at threshold 0.5.
pub fn fixture_from_confusion(cm: &ConfusionMatrix) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::with_capacity(cm.total() as usize);
    let mut labels = Vec::with_capacity(cm.total() as usize);
    for (n, s, y) in [
        (cm.tp, 0.9, true),
        (cm.fn_, 0.1, true),
        (cm.fp, 0.9, false),
        (cm.tn, 0.1, false),
    ] {
        scores.extend(std::iter::repeat_n(s, n as usize));
        labels.extend(std::iter::repeat_n(y, n as usize));
    }
    (scores, labels)
}
