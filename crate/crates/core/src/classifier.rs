//! Pseudo-label classifier trained from scratch on raw inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::PseudoLabels;
use crate::error::{Error, Result};
use crate::features::{check_sample_shape, epoch_batches, InputScaling};
use crate::nn::{CrossEntropy, Layer, Mode, Network, Objective, Optimizer, OptimizerConfig, Trace};
use crate::tensor::{argmax, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierPreset {
    /// Flattened input through ReLU hidden layers to `L` logits.
    Mlp { hidden: Vec<usize> },
    /// Two strided 3x3 convolutions then two dense layers.
    Conv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub preset: ClassifierPreset,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            preset: ClassifierPreset::Mlp { hidden: vec![256, 128] },
            epochs: 100,
            batch_size: 256,
            optimizer: OptimizerConfig::adam(1e-4),
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "classifier epochs and batch_size must be positive".into(),
            ));
        }
        if let ClassifierPreset::Mlp { hidden } = &self.preset {
            if hidden.contains(&0) {
                return Err(Error::Config("hidden widths must be positive".into()));
            }
        }
        self.optimizer.validate()
    }

    fn build(&self, sample_shape: &[usize], classes: usize, rng: &mut ChaCha8Rng) -> Result<Network> {
        let input: usize = sample_shape.iter().product();
        let mut layers = Vec::new();
        match &self.preset {
            ClassifierPreset::Mlp { hidden } => {
                let mut prev = input;
                for &w in hidden {
                    layers.push(Layer::dense(prev, w, rng)?);
                    layers.push(Layer::Relu);
                    prev = w;
                }
                layers.push(Layer::dense(prev, classes, rng)?);
            }
            ClassifierPreset::Conv => {
                let channels = match sample_shape.len() {
                    2 => 1,
                    3 => sample_shape[0],
                    _ => {
                        return Err(Error::Config(format!(
                            "conv preset needs image-shaped samples, got {sample_shape:?}"
                        )))
                    }
                };
                layers.push(Layer::conv2d(channels, 16, 3, 2, rng)?);
                layers.push(Layer::Relu);
                layers.push(Layer::conv2d(16, 32, 3, 2, rng)?);
                layers.push(Layer::Relu);
                let probe = Network::new(sample_shape.to_vec(), layers.clone())?;
                let flat: usize = probe.output_shape().iter().product();
                layers.push(Layer::dense(flat, 128, rng)?);
                layers.push(Layer::Relu);
                layers.push(Layer::dense(128, classes, rng)?);
            }
        }
        Network::new(sample_shape.to_vec(), layers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub net: Network,
    pub scaling: InputScaling,
    pub sample_shape: Vec<usize>,
    pub num_labels: usize,
    /// Training-set accuracy against the pseudo-labels after each epoch.
    pub accuracy_history: Vec<f64>,
    pub loss_history: Vec<f64>,
    pub config: ClassifierConfig,
}

impl ClassifierModel {
    /// Logits `[B, L]` of a raw batch.
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        check_sample_shape(&self.sample_shape, batch)?;
        self.net.predict(&self.scaling.apply(batch))
    }

    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(batch)?;
        Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
    }

    /// Forward pass keeping the trace for input gradients.
    pub(crate) fn forward(&self, batch: &Tensor) -> Result<(Tensor, Trace)> {
        check_sample_shape(&self.sample_shape, batch)?;
        self.net.forward(&self.scaling.apply(batch))
    }

    /// Gradient with respect to the raw input, given a gradient on the logits.
    pub(crate) fn input_gradient(&self, trace: &Trace, logit_grad: &Tensor) -> Result<Tensor> {
        let g = self.scaling.gain();
        Ok(self.net.backward(trace, logit_grad)?.input.map(|v| v * g))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

fn accuracy(net: &Network, xs: &Tensor, labels: &[usize]) -> Result<(f64, f64)> {
    let logits = net.predict(xs)?;
    let loss = CrossEntropy {
        labels: labels.to_vec(),
    }
    .evaluate(&logits)?
    .value;
    let hits = (0..logits.rows())
        .filter(|&i| argmax(logits.row(i)) == labels[i])
        .count();
    Ok((hits as f64 / labels.len() as f64, loss))
}

/// Supervised training on pseudo-labels with softmax cross-entropy.
pub fn train_classifier(x_train: &Tensor, labels: &PseudoLabels, cfg: &ClassifierConfig) -> Result<ClassifierModel> {
    cfg.validate()?;
    if x_train.shape().len() < 2 || x_train.rows() != labels.labels.len() {
        return Err(Error::Data(format!(
            "{} pseudo-labels for a batch of shape {:?}",
            labels.labels.len(),
            x_train.shape()
        )));
    }
    if labels.distinct() < 2 {
        return Err(Error::Data(
            "pseudo-labels use a single cluster; a classifier needs at least two".into(),
        ));
    }
    x_train.ensure_finite("classifier input")?;
    let sample_shape = x_train.shape()[1..].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = cfg.build(&sample_shape, labels.k, &mut rng)?;
    net.set_mode(Mode::Eval);
    let scaling = InputScaling::fit(x_train);
    let xs = scaling.apply(x_train);
    let mut opt = Optimizer::new(cfg.optimizer)?;
    let mut accuracy_history = Vec::with_capacity(cfg.epochs);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        for idx in epoch_batches(xs.rows(), cfg.batch_size, &mut rng) {
            let xb = xs.select_rows(&idx);
            let (logits, trace) = net.forward(&xb)?;
            let batch_labels = idx.iter().map(|&i| labels.labels[i]).collect();
            let eval = CrossEntropy { labels: batch_labels }.evaluate(&logits)?;
            let grads = net.backward(&trace, &eval.output_grad)?;
            opt.step(&mut net.params_mut(), &grads.params)?;
        }
        let (acc, loss) = accuracy(&net, &xs, &labels.labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("classifier training"));
        }
        accuracy_history.push(acc);
        loss_history.push(loss);
    }
    Ok(ClassifierModel {
        net,
        scaling,
        sample_shape,
        num_labels: labels.k,
        accuracy_history,
        loss_history,
        config: cfg.clone(),
    })
}
