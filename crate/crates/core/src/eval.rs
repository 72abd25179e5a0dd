//! Threshold-free and threshold-based evaluation of anomaly scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Anomaly evidence `1 − s`: larger means more abnormal.
pub fn anomaly_evidence(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|s| 1.0 - s).collect()
}

fn check_scored(evidence: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if evidence.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores for {} labels",
            evidence.len(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Data(format!("binary label expected, got {y}")));
    }
    if evidence.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("anomaly scores"));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("AUROC needs both normal and abnormal samples".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve with abnormal (`1`) as the positive class and
/// larger `evidence` as more abnormal. Ties earn half credit.
pub fn auroc(evidence: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_scored(evidence, labels)?;
    let mut order: Vec<usize> = (0..evidence.len()).collect();
    order.sort_by(|&a, &b| evidence[a].total_cmp(&evidence[b]));
    // Twice the positive rank sum keeps tied mid-ranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && evidence[order[j + 1]] == evidence[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        twice_rank_sum += twice_mid * positives;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub delta: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub points: Vec<ThresholdPoint>,
    /// Point maximizing `TPR − FPR` (lowest δ on ties).
    pub youden: ThresholdPoint,
}

/// Evaluates the decision rule `abnormal iff s ≤ δ` at every distinct score
/// and just below the smallest one.
pub fn threshold_sweep(scores: &[f64], labels: &[u8]) -> Result<ThresholdSweep> {
    let (pos, neg) = check_scored(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let below = scores[order[0]] - scores[order[0]].abs().max(1.0) * 1e-9;
    let point = |delta: f64, tp: usize, fp: usize| ThresholdPoint {
        delta,
        tpr: tp as f64 / pos as f64,
        fpr: fp as f64 / neg as f64,
        accuracy: (tp + neg - fp) as f64 / scores.len() as f64,
    };
    let mut points = vec![point(below, 0, 0)];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let delta = scores[order[i]];
        while i < order.len() && scores[order[i]] == delta {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(point(delta, tp, fp));
    }
    let youden = *points
        .iter()
        .reduce(|a, b| if b.tpr - b.fpr > a.tpr - a.fpr { b } else { a })
        .expect("sweep is non-empty");
    Ok(ThresholdSweep { points, youden })
}

/// Distance of each test latent vector to the mean training latent vector.
pub fn one_class_baseline(z_train: &Tensor, z_test: &Tensor) -> Result<Vec<f64>> {
    if z_train.shape().len() != 2 || z_test.shape().len() != 2 || z_train.row_len() != z_test.row_len() {
        return Err(Error::Shape {
            expected: z_train.shape().to_vec(),
            actual: z_test.shape().to_vec(),
        });
    }
    let d = z_train.row_len();
    let mut mean = vec![0.0; d];
    for i in 0..z_train.rows() {
        for (m, v) in mean.iter_mut().zip(z_train.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= z_train.rows() as f64;
    }
    Ok((0..z_test.rows())
        .map(|i| {
            z_test
                .row(i)
                .iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Score distribution of one latent test class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: u32,
    pub abnormal: bool,
    pub count: usize,
    pub mean_score: f64,
    /// Counts over equal-width bins spanning the observed score range.
    pub histogram: Vec<usize>,
}

pub const ORIENTATION: &str =
    "s = max temperature-scaled softmax; AUROC on evidence a = 1 - s (higher = more abnormal); abnormal iff s <= delta";

pub const HISTOGRAM_BINS: usize = 20;

/// Per-class score summaries; bins are shared across classes.
pub fn class_summaries(scores: &[f64], classes: &[u32], labels: &[u8]) -> Result<Vec<ClassSummary>> {
    if scores.len() != classes.len() || scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Data("scores, classes and labels must align".into()));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let bin = |s: f64| {
        if width > 0.0 {
            (((s - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        }
    };
    let mut ids: Vec<u32> = classes.to_vec();
    ids.sort_unstable();
    ids.dedup();
    Ok(ids
        .into_iter()
        .map(|class| {
            let members: Vec<usize> = (0..scores.len()).filter(|&i| classes[i] == class).collect();
            let mut histogram = vec![0; HISTOGRAM_BINS];
            for &i in &members {
                histogram[bin(scores[i])] += 1;
            }
            ClassSummary {
                class,
                abnormal: labels[members[0]] == 1,
                count: members.len(),
                mean_score: members.iter().map(|&i| scores[i]).sum::<f64>() / members.len() as f64,
                histogram,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Score orientation used throughout the report.
    pub orientation: String,
    pub scenario: String,
    /// Class labels treated as normal.
    pub normal_classes: Vec<u32>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub abnormal_ratio: f64,
    pub auroc: f64,
    pub baseline_auroc: Option<f64>,
    /// Threshold in force: the configured δ, or the Youden-optimal one.
    pub delta: f64,
    pub delta_from_config: bool,
    pub at_delta: ThresholdPoint,
    pub youden: ThresholdPoint,
    pub pseudo_label_counts: Vec<usize>,
    pub classifier_train_accuracy: Option<f64>,
    pub per_class: Vec<ClassSummary>,
    pub stage_seconds: Vec<(String, f64)>,
    /// The experiment configuration the run used.
    pub config: serde_json::Value,
}

impl EvaluationReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

/// Rule outcome at a fixed δ.
pub fn evaluate_at(scores: &[f64], labels: &[u8], delta: f64) -> Result<ThresholdPoint> {
    let (pos, neg) = check_scored(scores, labels)?;
    let (mut tp, mut fp) = (0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        if crate::detector::detect(s, delta) == 1 {
            if y == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok(ThresholdPoint {
        delta,
        tpr: tp as f64 / pos as f64,
        fpr: fp as f64 / neg as f64,
        accuracy: (tp + neg - fp) as f64 / scores.len() as f64,
    })
}
