//! Seeded Gaussian mixtures with diagonal covariance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub mean: Vec<f64>,
    /// Per-axis variance.
    pub variance: Vec<f64>,
    pub count: usize,
    pub label: u32,
}

impl GaussianMode {
    pub fn isotropic(mean: Vec<f64>, std_dev: f64, count: usize, label: u32) -> Self {
        let variance = vec![std_dev * std_dev; mean.len()];
        Self {
            mean,
            variance,
            count,
            label,
        }
    }
}

/// Draws exactly `count` points from each mode, then shuffles the rows.
pub fn synth_gaussian_mixture(modes: &[GaussianMode], seed: u64, split: Split) -> Result<LabeledDataset> {
    let dim = modes
        .first()
        .ok_or_else(|| Error::Config("mixture needs at least one mode".into()))?
        .mean
        .len();
    if dim == 0 {
        return Err(Error::Config("mixture dimension must be positive".into()));
    }
    for (i, m) in modes.iter().enumerate() {
        if m.mean.len() != dim || m.variance.len() != dim {
            return Err(Error::Config(format!(
                "mode {i} has dimension {}/{}, expected {dim}",
                m.mean.len(),
                m.variance.len()
            )));
        }
        if m.variance.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("mode {i} has a non-positive variance")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(Vec<f64>, u32)> = Vec::new();
    for m in modes {
        let sd: Vec<f64> = m.variance.iter().map(|v| v.sqrt()).collect();
        for _ in 0..m.count {
            let p = m
                .mean
                .iter()
                .zip(&sd)
                .map(|(mu, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + s * z
                })
                .collect();
            rows.push((p, m.label));
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("mixture has zero samples".into()));
    }
    rows.shuffle(&mut rng);
    let n = rows.len();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (p, l) in rows {
        data.extend(p);
        labels.push(l);
    }
    LabeledDataset::new(Tensor::new(vec![n, dim], data)?, labels, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_variance_collapses_to_mean() {
        let m = GaussianMode {
            mean: vec![1.5, -2.0],
            variance: vec![1e-12, 1e-12],
            count: 50,
            label: 0,
        };
        let ds = synth_gaussian_mixture(&[m], 1, Split::Train).unwrap();
        for i in 0..ds.len() {
            let r = ds.samples().row(i);
            assert!((r[0] - 1.5).abs() < 1e-4 && (r[1] + 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn exact_counts_per_label() {
        let ds = synth_gaussian_mixture(
            &[
                GaussianMode::isotropic(vec![0.0], 1.0, 100, 4),
                GaussianMode::isotropic(vec![5.0], 1.0, 50, 9),
            ],
            2,
            Split::Train,
        )
        .unwrap();
        assert_eq!(ds.len(), 150);
        let c = ds.label_counts();
        assert_eq!(c[&4], 100);
        assert_eq!(c[&9], 50);
    }

    #[test]
    fn non_positive_variance_rejected() {
        let m = GaussianMode {
            mean: vec![0.0],
            variance: vec![0.0],
            count: 1,
            label: 0,
        };
        assert!(synth_gaussian_mixture(&[m], 0, Split::Train).is_err());
    }

    #[test]
    fn six_sigma_modes_split_at_midpoint() {
        // P(|z| > 3) ≈ 0.27%, so a midpoint threshold is ≥ 99.7% accurate in expectation.
        let ds = synth_gaussian_mixture(
            &[
                GaussianMode::isotropic(vec![0.0], 1.0, 2000, 0),
                GaussianMode::isotropic(vec![6.0], 1.0, 2000, 1),
            ],
            3,
            Split::Train,
        )
        .unwrap();
        let correct = (0..ds.len())
            .filter(|&i| (ds.samples().row(i)[0] > 3.0) == (ds.labels()[i] == 1))
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.997);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let modes = [GaussianMode::isotropic(vec![0.0, 1.0], 0.5, 20, 0)];
        let a = synth_gaussian_mixture(&modes, 7, Split::Train).unwrap();
        let b = synth_gaussian_mixture(&modes, 7, Split::Train).unwrap();
        assert_eq!(a, b);
    }
}
