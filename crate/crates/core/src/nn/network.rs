use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::layer::{dropout_rng, Cache, Layer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    #[default]
    Eval,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Ties traces to the network value and parameter state that produced them.
#[derive(Debug, PartialEq, Eq)]
struct Identity {
    id: u64,
    generation: u64,
}

impl Identity {
    fn fresh() -> Self {
        Self {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            generation: 0,
        }
    }
}

/// Per-layer state retained by [`Network::forward`] for [`Network::backward`].
#[derive(Debug)]
pub struct Trace {
    net_id: u64,
    generation: u64,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    caches: Vec<Cache>,
}

impl Trace {
    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// One tensor per entry of [`Network::params`], same order and shapes.
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    dropout_seed: u64,
    #[serde(default)]
    dropout_step: u64,
    #[serde(skip, default = "Identity::fresh")]
    identity: Identity,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            mode: self.mode,
            dropout_seed: self.dropout_seed,
            dropout_step: self.dropout_step,
            identity: Identity::fresh(),
        }
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape && self.layers == other.layers && self.mode == other.mode
    }
}

impl Network {
    /// Builds a network for samples of `input_shape`, checking that every
    /// layer accepts its predecessor's output.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let net = Self {
            input_shape,
            layers,
            mode: Mode::Eval,
            dropout_seed: 0,
            dropout_step: 0,
            identity: Identity::fresh(),
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Config(format!(
                "invalid network input shape {:?}",
                self.input_shape
            )));
        }
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let fail = |reason: String| Error::Composition {
                layer: i,
                kind: layer.kind(),
                input: shape.clone(),
                reason,
            };
            layer.validate().map_err(fail)?;
            shape = layer.output_shape(&shape).map_err(fail)?;
        }
        Ok(())
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape.
    pub fn output_shape(&self) -> Vec<usize> {
        self.layers
            .iter()
            .try_fold(self.input_shape.clone(), |s, l| l.output_shape(&s))
            .expect("validated at construction")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn set_dropout_seed(&mut self, seed: u64) {
        self.dropout_seed = seed;
    }

    /// Draws fresh dropout masks for subsequent train-mode forwards.
    pub fn advance_dropout(&mut self) {
        self.dropout_step += 1;
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    /// Mutable parameter access. Invalidates outstanding traces.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.identity.generation += 1;
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let sample: usize = self.input_shape.iter().product();
        if batch.shape().len() < 2 || batch.row_len() != sample {
            let kind = self.layers.first().map_or("input", |l| l.kind());
            return Err(Error::Composition {
                layer: 0,
                kind,
                input: batch.shape().get(1..).unwrap_or_default().to_vec(),
                reason: format!("network expects batches of samples shaped {:?}", self.input_shape),
            });
        }
        Ok(())
    }

    fn run(&self, batch: &Tensor, keep_cache: bool) -> Result<(Tensor, Vec<Cache>)> {
        self.check_batch(batch)?;
        let mut shape = vec![batch.rows()];
        shape.extend_from_slice(&self.input_shape);
        let mut x = batch.clone().reshape(shape)?;
        let mut caches = Vec::with_capacity(if keep_cache { self.layers.len() } else { 0 });
        for (i, layer) in self.layers.iter().enumerate() {
            let mut rng = match (self.mode, layer) {
                (Mode::Train, Layer::Dropout { .. }) => Some(dropout_rng(self.dropout_seed, self.dropout_step, i)),
                _ => None,
            };
            let (y, cache) = layer.forward(&x, rng.as_mut(), keep_cache);
            if keep_cache {
                caches.push(cache);
            }
            x = y;
        }
        Ok((x, caches))
    }

    /// Forward pass over a batch `[B, ..input_shape]` keeping what the
    /// backward pass needs.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Trace)> {
        let (out, caches) = self.run(batch, true)?;
        out.ensure_finite("forward")?;
        let trace = Trace {
            net_id: self.identity.id,
            generation: self.identity.generation,
            input_shape: batch.shape().to_vec(),
            output_shape: out.shape().to_vec(),
            caches,
        };
        Ok((out, trace))
    }

    /// Forward pass without a trace.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let (out, _) = self.run(batch, false)?;
        out.ensure_finite("forward")?;
        Ok(out)
    }

    pub fn backward(&self, trace: &Trace, output_grad: &Tensor) -> Result<Gradients> {
        if trace.net_id != self.identity.id
            || trace.generation != self.identity.generation
            || trace.caches.len() != self.layers.len()
        {
            return Err(Error::StaleTrace);
        }
        if output_grad.shape() != trace.output_shape.as_slice() {
            return Err(Error::Shape {
                expected: trace.output_shape.clone(),
                actual: output_grad.shape().to_vec(),
            });
        }
        let mut params: Vec<Tensor> = self.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut slot = params.len();
        let mut dy = output_grad.clone();
        for (layer, cache) in self.layers.iter().zip(&trace.caches).rev() {
            let n = layer.params().len();
            slot -= n;
            dy = layer.backward(cache, &dy, &mut params[slot..slot + n]);
        }
        let input = dy.reshape(trace.input_shape.clone())?;
        Ok(Gradients { params, input })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let net: Network = crate::io::read_json(path)?;
        net.validate()?;
        Ok(net)
    }
}
