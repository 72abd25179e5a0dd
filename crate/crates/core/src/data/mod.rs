//! Dataset ingestion, synthetic generators and anomaly-detection scenarios.

pub mod catalog;
pub mod idx;
pub mod scenario;
pub mod synth;
pub mod vectors;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use catalog::{builtin_scenario_tables, Catalog, CatalogEntry};
pub use idx::{load_idx, load_mnist_dir};
pub use scenario::{build_scenario, Oracle, Scenario, ScenarioSpec};
pub use synth::{synth_gaussian_mixture, GaussianMode};
pub use vectors::{export_labeled_vectors, import_labeled_vectors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Samples with their true class labels. Only scenario construction and the
/// evaluation oracle see the labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Tensor,
    labels: Vec<u32>,
    split: Split,
}

impl LabeledDataset {
    pub fn new(samples: Tensor, labels: Vec<u32>, split: Split) -> Result<Self> {
        if samples.shape().len() < 2 {
            return Err(Error::Data("samples must be a batch with a leading sample axis".into()));
        }
        if samples.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} samples but {} labels",
                samples.rows(),
                labels.len()
            )));
        }
        Ok(Self { samples, labels, split })
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    pub fn label_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    /// Keeps samples whose index passes `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize, u32) -> bool) -> Option<Self> {
        let idx: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(i, &l)| keep(i, l))
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return None;
        }
        Some(Self {
            samples: self.samples.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        })
    }
}
