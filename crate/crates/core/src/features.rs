//! Autoencoder feature extraction.
//!
//! The encoder maps (scaled) inputs to a `hidden_dim` latent vector; the
//! decoder reconstructs the input through a sigmoid output, trained with
//! per-sample mean squared error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, Mse, Network, Objective, Optimizer, OptimizerConfig};
use crate::tensor::Tensor;

/// Affine map of raw inputs onto `[0, 1]` using the training range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub lo: f64,
    pub hi: f64,
}

impl InputScaling {
    pub fn fit(x: &Tensor) -> Self {
        let (lo, hi) = x
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Self { lo, hi }
    }

    /// Multiplier applied after subtracting `lo`.
    pub fn gain(&self) -> f64 {
        let span = self.hi - self.lo;
        if span > 0.0 {
            1.0 / span
        } else {
            1.0
        }
    }

    pub fn apply(&self, x: &Tensor) -> Tensor {
        let g = self.gain();
        x.map(|v| (v - self.lo) * g)
    }
}

pub(crate) fn check_sample_shape(expected: &[usize], batch: &Tensor) -> Result<()> {
    let want: usize = expected.iter().product();
    if batch.shape().len() < 2 || batch.row_len() != want {
        let mut shape = vec![batch.shape().first().copied().unwrap_or(0)];
        shape.extend_from_slice(expected);
        return Err(Error::Shape {
            expected: shape,
            actual: batch.shape().to_vec(),
        });
    }
    Ok(())
}

/// Shuffled minibatch index lists for one epoch.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AutoencoderPreset {
    /// Flattened input → hidden widths → latent, mirrored decoder.
    Mlp { hidden: Vec<usize> },
    /// Two strided 3x3 convolutions and a dense stack; needs 2-D or
    /// channel-first 3-D samples. The decoder is the MLP mirror.
    Conv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub preset: AutoencoderPreset,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Keep-probability of the dropout after each encoder hidden layer.
    pub dropout_keep: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            preset: AutoencoderPreset::Mlp { hidden: vec![256] },
            hidden_dim: 100,
            epochs: 100,
            batch_size: 256,
            optimizer: OptimizerConfig::adam(1e-3),
            dropout_keep: 0.9,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "autoencoder hidden_dim, epochs and batch_size must be positive".into(),
            ));
        }
        if let AutoencoderPreset::Mlp { hidden } = &self.preset {
            if hidden.contains(&0) {
                return Err(Error::Config("hidden widths must be positive".into()));
            }
        }
        Layer::dropout(self.dropout_keep)?;
        self.optimizer.validate()
    }

    fn build(&self, sample_shape: &[usize], rng: &mut ChaCha8Rng) -> Result<(Network, Network)> {
        let input: usize = sample_shape.iter().product();
        let dropout = |layers: &mut Vec<Layer>| -> Result<()> {
            if self.dropout_keep < 1.0 {
                layers.push(Layer::dropout(self.dropout_keep)?);
            }
            Ok(())
        };
        let mut enc = Vec::new();
        let mut widths = Vec::new();
        match &self.preset {
            AutoencoderPreset::Mlp { hidden } => {
                let mut prev = input;
                for &w in hidden {
                    enc.push(Layer::dense(prev, w, rng)?);
                    enc.push(Layer::Relu);
                    dropout(&mut enc)?;
                    widths.push(w);
                    prev = w;
                }
                enc.push(Layer::dense(prev, self.hidden_dim, rng)?);
            }
            AutoencoderPreset::Conv => {
                let channels = match sample_shape.len() {
                    2 => 1,
                    3 => sample_shape[0],
                    _ => {
                        return Err(Error::Config(format!(
                            "conv preset needs image-shaped samples, got {sample_shape:?}"
                        )))
                    }
                };
                enc.push(Layer::conv2d(channels, 8, 3, 2, rng)?);
                enc.push(Layer::Relu);
                enc.push(Layer::conv2d(8, 16, 3, 2, rng)?);
                enc.push(Layer::Relu);
                let probe = Network::new(sample_shape.to_vec(), enc.clone())?;
                let flat: usize = probe.output_shape().iter().product();
                enc.push(Layer::dense(flat, 256, rng)?);
                enc.push(Layer::Relu);
                dropout(&mut enc)?;
                enc.push(Layer::dense(256, self.hidden_dim, rng)?);
                widths.push(256);
            }
        }
        let mut dec = Vec::new();
        let mut prev = self.hidden_dim;
        for &w in widths.iter().rev() {
            dec.push(Layer::dense(prev, w, rng)?);
            dec.push(Layer::Relu);
            prev = w;
        }
        dec.push(Layer::dense(prev, input, rng)?);
        dec.push(Layer::Sigmoid);
        let mut encoder = Network::new(sample_shape.to_vec(), enc)?;
        encoder.set_dropout_seed(self.seed ^ 0x5EED);
        let decoder = Network::new(vec![self.hidden_dim], dec)?;
        Ok((encoder, decoder))
    }
}

/// The encoder half plus the input scaling it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub net: Network,
    pub scaling: InputScaling,
    pub sample_shape: Vec<usize>,
}

impl Encoder {
    pub fn hidden_dim(&self) -> usize {
        self.net.output_shape().iter().product()
    }

    /// Latent features `[B, hidden_dim]` of a raw batch, with dropout off.
    pub fn encode(&self, batch: &Tensor) -> Result<Tensor> {
        check_sample_shape(&self.sample_shape, batch)?;
        let x = self.scaling.apply(batch);
        if self.net.mode() == Mode::Eval {
            self.net.predict(&x)
        } else {
            let mut net = self.net.clone();
            net.set_mode(Mode::Eval);
            net.predict(&x)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Encoder,
    pub decoder: Network,
    /// Mean per-sample reconstruction MSE over the training set (dropout
    /// off) after each epoch.
    pub loss_history: Vec<f64>,
    pub config: AutoencoderConfig,
}

impl AutoencoderModel {
    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    pub fn encode(&self, batch: &Tensor) -> Result<Tensor> {
        self.encoder.encode(batch)
    }

    /// Mean per-sample reconstruction error of a raw batch.
    pub fn reconstruction_loss(&self, batch: &Tensor) -> Result<f64> {
        let z = self.encode(batch)?;
        let recon = self.decoder.predict(&z)?;
        let target = self.encoder.scaling.apply(batch);
        Ok(Mse { target }.evaluate(&recon)?.value)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

/// Trains encoder and decoder jointly on reconstruction error.
pub fn train_autoencoder(x_train: &Tensor, cfg: &AutoencoderConfig) -> Result<AutoencoderModel> {
    cfg.validate()?;
    if x_train.shape().len() < 2 {
        return Err(Error::Data("training data must be a batch of samples".into()));
    }
    x_train.ensure_finite("autoencoder input")?;
    let sample_shape = x_train.shape()[1..].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut encoder, mut decoder) = cfg.build(&sample_shape, &mut rng)?;
    let scaling = InputScaling::fit(x_train);
    let xs = scaling.apply(x_train);
    let n = xs.rows();
    let mut opt = Optimizer::new(cfg.optimizer)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        encoder.set_mode(Mode::Train);
        for idx in epoch_batches(n, cfg.batch_size, &mut rng) {
            let xb = xs.select_rows(&idx);
            let (z, enc_trace) = encoder.forward(&xb)?;
            let (recon, dec_trace) = decoder.forward(&z)?;
            let eval = Mse { target: xb }.evaluate(&recon)?;
            let dec_grads = decoder.backward(&dec_trace, &eval.output_grad)?;
            let enc_grads = encoder.backward(&enc_trace, &dec_grads.input)?;
            let grads: Vec<Tensor> = enc_grads.params.into_iter().chain(dec_grads.params).collect();
            let mut params = encoder.params_mut();
            params.extend(decoder.params_mut());
            opt.step(&mut params, &grads)?;
            encoder.advance_dropout();
        }
        encoder.set_mode(Mode::Eval);
        let recon = decoder.predict(&encoder.predict(&xs)?)?;
        let loss = Mse { target: xs.clone() }.evaluate(&recon)?.value;
        if !loss.is_finite() {
            return Err(Error::NonFinite("autoencoder training"));
        }
        history.push(loss);
    }
    Ok(AutoencoderModel {
        encoder: Encoder {
            net: encoder,
            scaling,
            sample_shape,
        },
        decoder,
        loss_history: history,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> AutoencoderConfig {
        AutoencoderConfig {
            preset: AutoencoderPreset::Mlp { hidden: vec![8] },
            hidden_dim: 3,
            epochs: 5,
            batch_size: 4,
            optimizer: OptimizerConfig::adam(0.01),
            ..AutoencoderConfig::default()
        }
    }

    fn toy_data(n: usize) -> Tensor {
        let data = (0..n * 6).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        Tensor::new(vec![n, 6], data).unwrap()
    }

    #[test]
    fn defaults_follow_reference_settings() {
        let c = AutoencoderConfig::default();
        assert_eq!(c.hidden_dim, 100);
        assert_eq!(c.epochs, 100);
        assert_eq!(c.optimizer, OptimizerConfig::adam(1e-3));
    }

    #[test]
    fn history_has_one_entry_per_epoch() {
        let m = train_autoencoder(&toy_data(10), &small_cfg()).unwrap();
        assert_eq!(m.loss_history.len(), 5);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let cfg = AutoencoderConfig {
            optimizer: OptimizerConfig::adam(0.0),
            ..small_cfg()
        };
        let x = toy_data(10);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (enc0, dec0) = cfg.build(&[6], &mut rng).unwrap();
        let m = train_autoencoder(&x, &cfg).unwrap();
        assert_eq!(m.encoder.net.params(), enc0.params());
        assert_eq!(m.decoder.params(), dec0.params());
        assert!(m.loss_history.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn repeated_point_is_memorized() {
        let row = [0.1, 0.9, 0.4, 0.6, 0.0, 1.0];
        let data: Vec<f64> = row.iter().copied().cycle().take(6 * 8).collect();
        let x = Tensor::new(vec![8, 6], data).unwrap();
        let cfg = AutoencoderConfig {
            epochs: 200,
            dropout_keep: 1.0,
            ..small_cfg()
        };
        let m = train_autoencoder(&x, &cfg).unwrap();
        let last = *m.loss_history.last().unwrap();
        assert!(last < 1e-3, "{last}");
    }

    #[test]
    fn encode_is_deterministic_with_requested_width() {
        let cfg = AutoencoderConfig {
            hidden_dim: 10,
            epochs: 1,
            ..small_cfg()
        };
        let x = toy_data(6);
        let m = train_autoencoder(&x, &cfg).unwrap();
        let a = m.encode(&x).unwrap();
        assert_eq!(a.shape(), &[6, 10]);
        assert_eq!(a, m.encode(&x).unwrap());
        assert!(matches!(m.encode(&Tensor::zeros(&[1, 5])), Err(Error::Shape { .. })));
    }

    #[test]
    fn conv_preset_needs_images() {
        let cfg = AutoencoderConfig {
            preset: AutoencoderPreset::Conv,
            epochs: 1,
            ..small_cfg()
        };
        assert!(train_autoencoder(&toy_data(4), &cfg).is_err());
        let img = Tensor::new(vec![2, 9, 9], (0..162).map(|v| (v % 5) as f64).collect()).unwrap();
        let m = train_autoencoder(&img, &cfg).unwrap();
        assert_eq!(m.encode(&img).unwrap().shape(), &[2, 3]);
    }

    #[test]
    fn empty_and_ragged_sample_lists_cannot_form_a_batch() {
        assert!(Tensor::stack(&[]).is_err());
        let a = Tensor::vector(vec![1.0, 2.0]);
        let b = Tensor::vector(vec![1.0]);
        assert!(Tensor::stack(&[&a, &b]).is_err());
    }

    #[test]
    fn scaling_maps_training_range_to_unit_interval() {
        let x = Tensor::new(vec![2, 2], vec![-2.0, 0.0, 2.0, 6.0]).unwrap();
        let s = InputScaling::fit(&x);
        assert_eq!(s.apply(&x).data(), &[0.0, 0.25, 0.5, 1.0]);
        let flat = InputScaling::fit(&Tensor::filled(&[2, 2], 3.0));
        assert_eq!(flat.gain(), 1.0);
    }
}
