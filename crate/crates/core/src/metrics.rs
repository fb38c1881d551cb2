//! Binary classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("no samples".into()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {s} is not a number")));
    }
    Ok(())
}

/// Fraction of samples where `score >= threshold` agrees with the label.
pub fn accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= threshold) == y)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Area under the ROC curve as the Mann–Whitney statistic: the share of
/// positive–negative pairs ranked correctly, ties counting one half.
/// Computed from average ranks in integer arithmetic, so it equals the
/// pairwise definition exactly.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC AUC needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives; a tie block spanning ranks i+1..=j
    // gives each member the average rank (i+1+j)/2.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let positives_in_block = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        twice_rank_sum += positives_in_block * (i as u64 + 1 + j as u64);
        i = j;
    }
    let twice_u = twice_rank_sum - pos * (pos + 1);
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// Average precision: mean over positives of the precision at their rank in
/// descending-score order. Equal scores keep their input order.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 {
        return Err(Error::UndefinedMetric("PR AUC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            tp += 1;
            sum += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    check_lengths(scores, labels)?;
    let mut c = Confusion {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.true_positive += 1,
            (true, false) => c.false_positive += 1,
            (false, false) => c.true_negative += 1,
            (false, true) => c.false_negative += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub accuracy: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub confusion: Confusion,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "accuracy,roc_auc,pr_auc,positives,negatives,tp,fp,tn,fn";

    pub fn compute(scores: &[f64], labels: &[bool]) -> Result<Self> {
        let threshold = 0.5;
        let positives = labels.iter().filter(|&&y| y).count();
        Ok(Self {
            threshold,
            accuracy: accuracy(scores, labels, threshold)?,
            roc_auc: roc_auc(scores, labels)?,
            pr_auc: pr_auc(scores, labels)?,
            positives,
            negatives: labels.len() - positives,
            confusion: confusion(scores, labels, threshold)?,
        })
    }

    pub fn to_csv_row(&self) -> String {
        let c = &self.confusion;
        format!(
            "{:.6},{:.6},{:.6},{},{},{},{},{},{}",
            self.accuracy,
            self.roc_auc,
            self.pr_auc,
            self.positives,
            self.negatives,
            c.true_positive,
            c.false_positive,
            c.true_negative,
            c.false_negative
        )
    }
}
