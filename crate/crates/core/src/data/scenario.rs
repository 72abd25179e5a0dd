//! Super-category scenarios: train on a set of normal classes with their
//! labels removed, test on everything.
//!
//! Pipeline stages only ever receive [`Scenario::train`] / [`Scenario::test`]
//! tensors. Latent class labels live in [`Oracle`], which only evaluation
//! diagnostics read.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub dataset: String,
    /// Class labels treated as normal.
    pub normal: Vec<u32>,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>, dataset: impl Into<String>, normal: Vec<u32>) -> Self {
        Self {
            name: name.into(),
            dataset: dataset.into(),
            normal,
        }
    }

    /// Single-class normal set for classic one-class evaluation.
    pub fn one_class(dataset: impl Into<String>, label: u32) -> Self {
        let dataset = dataset.into();
        Self {
            name: format!("{dataset}-{label}"),
            dataset,
            normal: vec![label],
        }
    }

    pub fn is_normal(&self, label: u32) -> bool {
        self.normal.contains(&label)
    }
}

/// True latent labels, for diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    train_classes: Vec<u32>,
    test_classes: Vec<u32>,
}

impl Oracle {
    pub fn train_classes(&self) -> &[u32] {
        &self.train_classes
    }

    pub fn test_classes(&self) -> &[u32] {
        &self.test_classes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    spec: ScenarioSpec,
    train: Tensor,
    test: Tensor,
    test_labels: Vec<u8>,
    oracle: Oracle,
}

impl Scenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// Normal-class training samples, unlabeled.
    pub fn train(&self) -> &Tensor {
        &self.train
    }

    pub fn test(&self) -> &Tensor {
        &self.test
    }

    /// Binary test labels: 0 normal, 1 abnormal.
    pub fn test_labels(&self) -> &[u8] {
        &self.test_labels
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    /// Fraction of test samples that are abnormal.
    pub fn abnormal_ratio(&self) -> f64 {
        self.test_labels.iter().filter(|&&y| y == 1).count() as f64 / self.test_labels.len() as f64
    }

    /// Keeps only the first `n` training samples.
    pub fn truncate_train(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("training limit must be positive".into()));
        }
        if n < self.train.rows() {
            let idx: Vec<usize> = (0..n).collect();
            self.train = self.train.select_rows(&idx);
            self.oracle.train_classes.truncate(n);
        }
        Ok(self)
    }

    /// Keeps only the first `n` test samples; both classes must remain.
    pub fn truncate_test(mut self, n: usize) -> Result<Self> {
        if n < self.test.rows() {
            let idx: Vec<usize> = (0..n).collect();
            self.test = self.test.select_rows(&idx);
            self.test_labels.truncate(n);
            self.oracle.test_classes.truncate(n);
            check_both_classes(&self.test_labels)?;
        }
        Ok(self)
    }
}

fn check_both_classes(labels: &[u8]) -> Result<()> {
    let abnormal = labels.iter().filter(|&&y| y == 1).count();
    if abnormal == 0 || abnormal == labels.len() {
        return Err(Error::Data(
            "test set must contain both normal and abnormal samples".into(),
        ));
    }
    Ok(())
}

pub fn build_scenario(train: &LabeledDataset, test: &LabeledDataset, spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.normal.is_empty() {
        return Err(Error::Config(format!("scenario {} has no normal classes", spec.name)));
    }
    if train.sample_shape() != test.sample_shape() {
        return Err(Error::Shape {
            expected: train.sample_shape().to_vec(),
            actual: test.sample_shape().to_vec(),
        });
    }
    let train_labels: BTreeSet<u32> = train.labels().iter().copied().collect();
    let test_labels: BTreeSet<u32> = test.labels().iter().copied().collect();
    for c in &spec.normal {
        if !train_labels.contains(c) || !test_labels.contains(c) {
            return Err(Error::Config(format!(
                "scenario {}: class {c} is missing from the train or test split",
                spec.name
            )));
        }
    }
    let normal_train = train
        .filter(|_, l| spec.is_normal(l))
        .ok_or_else(|| Error::Data("no normal training samples".into()))?;
    let binary: Vec<u8> = test.labels().iter().map(|&l| u8::from(!spec.is_normal(l))).collect();
    check_both_classes(&binary)?;
    Ok(Scenario {
        spec: spec.clone(),
        train: normal_train.samples().clone(),
        test: test.samples().clone(),
        test_labels: binary,
        oracle: Oracle {
            train_classes: normal_train.labels().to_vec(),
            test_classes: test.labels().to_vec(),
        },
    })
}
