//! Temperature-scaled, input-perturbed softmax confidence.
//!
//! A test input is nudged against the gradient of the negative
//! log-probability of its predicted label, then scored by the maximum of the
//! temperature-scaled softmax. Low confidence flags an anomaly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::nn::softmax_into;
use crate::tensor::{argmax, Tensor};

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub temperature: f64,
    pub epsilon: f64,
    /// Decision threshold; when absent, evaluation picks the Youden-optimal one.
    pub delta: Option<f64>,
    /// Valid input range for perturbed samples, if any.
    pub clamp: Option<(f64, f64)>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            temperature: 1000.0,
            epsilon: 0.0014,
            delta: None,
            clamp: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if let Some((lo, hi)) = self.clamp {
            if !(lo < hi) {
                return Err(Error::Config(format!("clamp range ({lo}, {hi}) is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    /// Maximum temperature-scaled softmax of the perturbed input.
    pub s: f64,
    /// Pseudo-label predicted for the unperturbed input.
    pub predicted: usize,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn perturb_chunk(model: &ClassifierModel, x: &Tensor, cfg: &DetectorConfig) -> Result<(Tensor, Vec<usize>)> {
    let (logits, trace) = model.forward(x)?;
    let width = logits.row_len();
    let predicted: Vec<usize> = (0..logits.rows()).map(|i| argmax(logits.row(i))).collect();
    if cfg.epsilon == 0.0 {
        return Ok((x.clone(), predicted));
    }
    // Gradient of -log p_ŷ(x; T) on the logits is (p - onehot)/T; the
    // positive 1/T factor does not affect the sign.
    let mut grad = Tensor::zeros(logits.shape());
    for (i, &y) in predicted.iter().enumerate() {
        let row = grad.row_mut(i);
        softmax_into(&logits.data()[i * width..(i + 1) * width], cfg.temperature, row);
        row[y] -= 1.0;
    }
    let gx = model.input_gradient(&trace, &grad)?;
    let mut out = x.clone();
    for (v, g) in out.data_mut().iter_mut().zip(gx.data()) {
        *v -= cfg.epsilon * sign(*g);
        if let Some((lo, hi)) = cfg.clamp {
            *v = v.clamp(lo, hi);
        }
    }
    Ok((out, predicted))
}

/// `x̃ = x − ε · sign(−∇x log p_ŷ(x; T))`, optionally clamped.
pub fn perturb_input(model: &ClassifierModel, x: &Tensor, cfg: &DetectorConfig) -> Result<Tensor> {
    cfg.validate()?;
    let mut parts = Vec::new();
    for start in (0..x.rows()).step_by(CHUNK) {
        let idx: Vec<usize> = (start..(start + CHUNK).min(x.rows())).collect();
        parts.push(perturb_chunk(model, &x.select_rows(&idx), cfg)?.0);
    }
    let rows: Vec<&Tensor> = parts.iter().collect();
    concat(&rows, x.shape())
}

fn concat(parts: &[&Tensor], shape: &[usize]) -> Result<Tensor> {
    let data = parts.iter().flat_map(|t| t.data().iter().copied()).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Scores every row of a raw test batch.
pub fn score(model: &ClassifierModel, x: &Tensor, cfg: &DetectorConfig) -> Result<Vec<AnomalyScore>> {
    cfg.validate()?;
    x.ensure_finite("detector input")?;
    let mut out = Vec::with_capacity(x.rows());
    let mut probs = vec![0.0; model.num_labels];
    for start in (0..x.rows()).step_by(CHUNK) {
        let idx: Vec<usize> = (start..(start + CHUNK).min(x.rows())).collect();
        let (xt, predicted) = perturb_chunk(model, &x.select_rows(&idx), cfg)?;
        let logits = model.logits(&xt)?;
        for (i, y) in predicted.into_iter().enumerate() {
            softmax_into(logits.row(i), cfg.temperature, &mut probs);
            let s = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.push(AnomalyScore { s, predicted: y });
        }
    }
    Ok(out)
}

/// 0 (normal) iff `s > δ`; a score equal to the threshold is abnormal.
pub fn detect(s: f64, delta: f64) -> u8 {
    u8::from(s <= delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub temperature: f64,
    pub epsilon: f64,
    pub auroc: f64,
}

/// Picks `(T, ε)` maximizing AUROC on a labeled validation set; earlier grid
/// entries win ties.
pub fn grid_search(
    model: &ClassifierModel,
    x_val: &Tensor,
    y_val: &[u8],
    temperatures: &[f64],
    epsilons: &[f64],
    clamp: Option<(f64, f64)>,
) -> Result<(GridPoint, Vec<GridPoint>)> {
    if temperatures.is_empty() || epsilons.is_empty() {
        return Err(Error::Config("grid search needs at least one T and one ε".into()));
    }
    let mut all = Vec::new();
    for &temperature in temperatures {
        for &epsilon in epsilons {
            let cfg = DetectorConfig {
                temperature,
                epsilon,
                delta: None,
                clamp,
            };
            let s: Vec<f64> = score(model, x_val, &cfg)?.iter().map(|a| a.s).collect();
            let auroc = crate::eval::auroc(&crate::eval::anomaly_evidence(&s), y_val)?;
            all.push(GridPoint {
                temperature,
                epsilon,
                auroc,
            });
        }
    }
    let best = *all
        .iter()
        .reduce(|a, b| if b.auroc > a.auroc { b } else { a })
        .expect("grid is non-empty");
    Ok((best, all))
}

/// CSV with `sample_index,s,predicted,label` rows.
pub fn write_scores_csv(path: &Path, scores: &[AnomalyScore], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut text = String::from("sample_index,s,predicted,label\n");
    for (i, (a, y)) in scores.iter().zip(labels).enumerate() {
        text.push_str(&format!("{i},{},{},{y}\n", a.s, a.predicted));
    }
    crate::io::write_text(path, &text)
}

/// Reads back `(scores, labels)` from [`write_scores_csv`] output.
pub fn read_scores_csv(path: &Path) -> Result<(Vec<AnomalyScore>, Vec<u8>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = || Error::Parse {
            path: path.to_path_buf(),
            line: row + 2,
            reason: "expected sample_index,s,predicted,label".into(),
        };
        if record.len() != 4 {
            return Err(bad());
        }
        let s: f64 = record[1].parse().map_err(|_| bad())?;
        let predicted: usize = record[2].parse().map_err(|_| bad())?;
        let label: u8 = record[3].parse().map_err(|_| bad())?;
        if label > 1 || !s.is_finite() {
            return Err(bad());
        }
        scores.push(AnomalyScore { s, predicted });
        labels.push(label);
    }
    Ok((scores, labels))
}
