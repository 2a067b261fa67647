use serde::{Deserialize, Serialize};

use crate::corpus::LabeledPair;
use crate::error::{Error, Result};
use crate::teacher::Discriminant;

fn check(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from tie groups with integer counts.
pub fn metric_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the Mann-Whitney U statistic.
    let mut u2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut gp, mut gn) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                gp += 1;
            } else {
                gn += 1;
            }
            j += 1;
        }
        u2 += 2 * gp * neg_below + gp * gn;
        neg_below += gn;
        i = j;
    }
    Ok(u2 as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// One operating point of a threshold sweep: predict positive iff
/// `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Operating points at every distinct observed score, descending.
pub fn threshold_sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<OperatingPoint>> {
    let (pos, _) = check(scores, labels)?;
    let order = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(OperatingPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / pos as f64,
        });
    }
    Ok(out)
}

/// Highest recall over thresholds whose precision reaches `target`; 0 when
/// none does.
pub fn metric_recall_at_precision(scores: &[f64], labels: &[bool], target: f64) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Config(format!(
            "precision target must be in (0,1], got {target}"
        )));
    }
    Ok(threshold_sweep(scores, labels)?
        .into_iter()
        .filter(|p| p.precision >= target)
        .map(|p| p.recall)
        .fold(0.0, f64::max))
}

/// A calibrated acceptance threshold: accept a pair iff `score >= tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_dev: usize,
    /// False when no threshold reached the target; `tau` then rejects every
    /// score in `[0, 1]`.
    pub achievable: bool,
}

impl Threshold {
    /// Accepts nothing in `[0, 1]`.
    pub const REJECT_ALL: f64 = 1.0 + 1e-9;

    pub fn fixed(tau: f64) -> Self {
        Threshold {
            tau,
            precision: f64::NAN,
            recall: f64::NAN,
            n_dev: 0,
            achievable: true,
        }
    }

    pub fn accepts(&self, score: f64) -> bool {
        score >= self.tau
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tau": self.tau,
            "precision": self.precision,
            "recall": self.recall,
            "n_dev": self.n_dev,
            "achievable": self.achievable,
        })
    }
}

/// Smallest observed-score threshold whose precision on `scores` reaches
/// `target`.
pub fn calibrate_scores(scores: &[f64], labels: &[bool], target: f64) -> Result<Threshold> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Config(format!(
            "precision target must be in (0,1], got {target}"
        )));
    }
    let sweep = threshold_sweep(scores, labels)?;
    let best = sweep
        .iter()
        .filter(|p| p.precision >= target)
        .min_by(|a, b| a.threshold.total_cmp(&b.threshold));
    Ok(match best {
        Some(p) => Threshold {
            tau: p.threshold,
            precision: p.precision,
            recall: p.recall,
            n_dev: scores.len(),
            achievable: true,
        },
        None => Threshold {
            tau: Threshold::REJECT_ALL,
            precision: 0.0,
            recall: 0.0,
            n_dev: scores.len(),
            achievable: false,
        },
    })
}

pub fn calibrate_threshold(teacher: &dyn Discriminant, dev: &[LabeledPair], target: f64) -> Result<Threshold> {
    let scores = teacher.score_pairs(dev)?;
    let labels: Vec<bool> = dev.iter().map(|p| p.synonymous).collect();
    calibrate_scores(&scores, &labels, target)
}
