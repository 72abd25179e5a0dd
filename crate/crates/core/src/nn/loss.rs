//! Losses and the temperature-scaled softmax.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to this before taking a log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Writes `softmax(logits / t)` into `out`.
pub fn softmax_into(logits: &[f64], t: f64, out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = ((l - max) / t).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Row-wise softmax of `logits / t`. Rank-1 input is treated as one row.
pub fn softmax_with_temperature(logits: &Tensor, t: f64) -> Result<Tensor> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("temperature must be positive, got {t}")));
    }
    logits.ensure_finite("softmax input")?;
    let width = *logits.shape().last().expect("tensors have rank >= 1");
    let mut out = logits.clone();
    for (src, dst) in logits
        .data()
        .chunks_exact(width)
        .zip(out.data_mut().chunks_exact_mut(width))
    {
        softmax_into(src, t, dst);
    }
    Ok(out)
}

pub struct ObjectiveEval {
    pub value: f64,
    /// Gradient with respect to the network output.
    pub output_grad: Tensor,
    /// Gradients for the objective's own trainable tensors, in
    /// [`Objective::params_mut`] order.
    pub param_grads: Vec<Tensor>,
}

/// A scalar loss on a network's output batch.
pub trait Objective {
    fn evaluate(&self, output: &Tensor) -> Result<ObjectiveEval>;

    /// Trainable tensors owned by the loss itself (cluster centroids, say).
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }
}

/// Mean squared error, averaged over every element of the batch.
#[derive(Debug, Clone)]
pub struct Mse {
    pub target: Tensor,
}

impl Objective for Mse {
    fn evaluate(&self, output: &Tensor) -> Result<ObjectiveEval> {
        if output.len() != self.target.len() {
            return Err(Error::Shape {
                expected: self.target.shape().to_vec(),
                actual: output.shape().to_vec(),
            });
        }
        let n = output.len() as f64;
        let mut grad = output.clone();
        let mut value = 0.0;
        for (g, &t) in grad.data_mut().iter_mut().zip(self.target.data()) {
            let d = *g - t;
            value += d * d;
            *g = 2.0 * d / n;
        }
        Ok(ObjectiveEval {
            value: value / n,
            output_grad: grad,
            param_grads: Vec::new(),
        })
    }
}

/// Per-sample MSE for a `[B, ..]` batch.
pub fn mse_per_sample(output: &Tensor, target: &Tensor) -> Vec<f64> {
    let w = output.row_len();
    output
        .data()
        .chunks_exact(w)
        .zip(target.data().chunks_exact(w))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / w as f64)
        .collect()
}

/// Softmax cross-entropy on logits, averaged over the batch.
#[derive(Debug, Clone)]
pub struct CrossEntropy {
    pub labels: Vec<usize>,
}

impl Objective for CrossEntropy {
    fn evaluate(&self, logits: &Tensor) -> Result<ObjectiveEval> {
        if logits.shape().len() != 2 || logits.rows() != self.labels.len() {
            return Err(Error::Shape {
                expected: vec![self.labels.len(), logits.row_len()],
                actual: logits.shape().to_vec(),
            });
        }
        let width = logits.row_len();
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= width) {
            return Err(Error::Data(format!("label {bad} outside {width} classes")));
        }
        let b = logits.rows() as f64;
        let mut grad = softmax_with_temperature(logits, 1.0)?;
        let mut value = 0.0;
        for (row, &label) in grad.data_mut().chunks_exact_mut(width).zip(&self.labels) {
            value -= row[label].max(LOG_FLOOR).ln();
            row[label] -= 1.0;
            for g in row.iter_mut() {
                *g /= b;
            }
        }
        Ok(ObjectiveEval {
            value: value / b,
            output_grad: grad,
            param_grads: Vec::new(),
        })
    }
}

/// Identically zero loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroLoss;

impl Objective for ZeroLoss {
    fn evaluate(&self, output: &Tensor) -> Result<ObjectiveEval> {
        Ok(ObjectiveEval {
            value: 0.0,
            output_grad: Tensor::zeros(output.shape()),
            param_grads: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn softmax(l: &[f64], t: f64) -> Vec<f64> {
        softmax_with_temperature(&Tensor::vector(l.to_vec()), t)
            .unwrap()
            .into_data()
    }

    #[test]
    fn symmetric_logits_give_uniform() {
        for t in [0.01, 1.0, 1000.0] {
            assert_eq!(softmax(&[0.0, 0.0], t), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn two_class_closed_form() {
        let p = softmax(&[2.0, 0.0], 1.0);
        let e2 = 2f64.exp();
        assert!((p[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e2 + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn high_temperature_flattens() {
        let p = softmax(&[5.0, 1.0, 1.0], 1000.0);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn non_positive_temperature_rejected() {
        let l = Tensor::vector(vec![1.0, 2.0]);
        assert!(softmax_with_temperature(&l, 0.0).is_err());
        assert!(softmax_with_temperature(&l, -1.0).is_err());
    }

    #[test]
    fn large_logits_stay_finite() {
        let p = softmax(&[1e4, -1e4, 0.0], 1.0);
        assert_eq!(p[0], 1.0);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let ce = CrossEntropy { labels: vec![1] };
        let e = ce.evaluate(&Tensor::new(vec![1, 4], vec![0.0; 4]).unwrap()).unwrap();
        assert!((e.value - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mse_value() {
        let m = Mse {
            target: Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap(),
        };
        let e = m.evaluate(&Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.output_grad.data(), &[-1.0, 0.0]);
    }
}
