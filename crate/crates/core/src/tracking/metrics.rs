use serde::{Deserialize, Serialize};

use super::{Scenario, TrackingResult};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: u32,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Set when nothing was predicted as this target (TP + FP = 0).
    pub precision_undefined: bool,
    /// Set when the target never occurs in the ground truth (TP + FN = 0).
    pub recall_undefined: bool,
}

impl TargetMetrics {
    fn from_counts(target: u32, tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den > 0 { num as f64 / den as f64 } else { 0.0 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            target,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_measure,
            precision_undefined: tp + fp == 0,
            recall_undefined: tp + fn_ == 0,
        }
    }
}

/// Per-target counts and scores with unweighted means over targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_target: Vec<TargetMetrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f_measure: f64,
    pub detections: usize,
}

/// Scores a result against the scenario's ground truth. Results are
/// matched to detections by position and must agree on frame and box.
pub fn evaluate(result: &TrackingResult, scenario: &Scenario) -> Result<MetricsReport> {
    if result.detections.len() != scenario.len() {
        return Err(Error::DimensionMismatch {
            expected: scenario.len(),
            actual: result.detections.len(),
        });
    }
    for (i, (p, d)) in result.detections.iter().zip(scenario.detections()).enumerate() {
        if p.frame != d.frame || p.bbox != d.bbox {
            return Err(Error::InvalidParams(format!(
                "result entry {i} (frame {}) does not match scenario detection (frame {})",
                p.frame, d.frame
            )));
        }
    }
    let truth = scenario
        .detections()
        .iter()
        .enumerate()
        .map(|(i, d)| d.truth_id.ok_or(Error::MissingGroundTruth(i)))
        .collect::<Result<Vec<u32>>>()?;
    evaluate_labels(&result.predicted_ids(), &truth, scenario.num_targets())
}

/// Counting core of [`evaluate`]: identities in `1..=num_targets`.
///
/// A wrong prediction counts as a false positive for the predicted target
/// and a false negative for the true one.
pub fn evaluate_labels(predicted: &[u32], truth: &[u32], num_targets: u32) -> Result<MetricsReport> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    let c = num_targets as usize;
    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fn_ = vec![0usize; c];
    for (&p, &t) in predicted.iter().zip(truth) {
        for id in [p, t] {
            if id == 0 || id > num_targets {
                return Err(Error::UnknownTarget {
                    target: id,
                    num_targets,
                });
            }
        }
        let (p, t) = (p as usize - 1, t as usize - 1);
        if p == t {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let per_target: Vec<TargetMetrics> = (0..c)
        .map(|k| TargetMetrics::from_counts(k as u32 + 1, tp[k], fp[k], fn_[k]))
        .collect();
    let mean = |f: fn(&TargetMetrics) -> f64| per_target.iter().map(f).sum::<f64>() / c as f64;
    Ok(MetricsReport {
        mean_precision: mean(|m| m.precision),
        mean_recall: mean(|m| m.recall),
        mean_f_measure: mean(|m| m.f_measure),
        detections: truth.len(),
        per_target,
    })
}
