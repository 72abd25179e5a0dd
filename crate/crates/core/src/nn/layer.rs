//! Layer vocabulary: dense, conv2d (valid padding), relu, sigmoid, dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_width: usize,
    pub out_width: usize,
    /// `(out_width, in_width)`
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `(out_channels, in_channels, kernel, kernel)`
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Relu,
    Sigmoid,
    Dropout { keep: f64 },
}

/// What a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Tensor),
    Output(Tensor),
    Mask(Option<Vec<f64>>),
    Columns { input_shape: Vec<usize>, cols: Vec<f64> },
    None,
}

fn glorot<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("extent product matches")
}

impl Layer {
    pub fn dense<R: Rng + ?Sized>(in_width: usize, out_width: usize, rng: &mut R) -> Result<Self> {
        if in_width == 0 || out_width == 0 {
            return Err(Error::Config("dense widths must be positive".into()));
        }
        Ok(Layer::Dense(Dense {
            in_width,
            out_width,
            weight: glorot(&[out_width, in_width], in_width, out_width, rng),
            bias: Tensor::zeros(&[out_width]),
        }))
    }

    /// Dense layer from explicit parameters.
    pub fn dense_from(weight: Tensor, bias: Tensor) -> Result<Self> {
        let &[out_width, in_width] = weight.shape() else {
            return Err(Error::Config(format!(
                "dense weight must be rank 2, got {:?}",
                weight.shape()
            )));
        };
        if bias.shape() != [out_width] {
            return Err(Error::Shape {
                expected: vec![out_width],
                actual: bias.shape().to_vec(),
            });
        }
        Ok(Layer::Dense(Dense {
            in_width,
            out_width,
            weight,
            bias,
        }))
    }

    pub fn conv2d<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
            return Err(Error::Config(
                "conv2d channels, kernel and stride must be positive".into(),
            ));
        }
        let kk = kernel * kernel;
        Ok(Layer::Conv2d(Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: glorot(
                &[out_channels, in_channels, kernel, kernel],
                in_channels * kk,
                out_channels * kk,
                rng,
            ),
            bias: Tensor::zeros(&[out_channels]),
        }))
    }

    pub fn dropout(keep: f64) -> Result<Self> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::Config(format!(
                "dropout keep-probability must lie in (0, 1], got {keep}"
            )));
        }
        Ok(Layer::Dropout { keep })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu => "relu",
            Layer::Sigmoid => "sigmoid",
            Layer::Dropout { .. } => "dropout",
        }
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        match self {
            Layer::Dense(d) => {
                if d.weight.shape() != [d.out_width, d.in_width] || d.bias.shape() != [d.out_width] {
                    return Err(format!(
                        "dense parameters {:?}/{:?} disagree with widths {}x{}",
                        d.weight.shape(),
                        d.bias.shape(),
                        d.out_width,
                        d.in_width
                    ));
                }
            }
            Layer::Conv2d(c) => {
                if c.weight.shape() != [c.out_channels, c.in_channels, c.kernel, c.kernel]
                    || c.bias.shape() != [c.out_channels]
                    || c.stride == 0
                {
                    return Err("conv2d parameters disagree with hyperparameters".into());
                }
            }
            Layer::Dropout { keep } => {
                if !(*keep > 0.0 && *keep <= 1.0) {
                    return Err(format!("dropout keep-probability {keep} outside (0, 1]"));
                }
            }
            Layer::Relu | Layer::Sigmoid => {}
        }
        Ok(())
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match self {
            Layer::Dense(d) => {
                let n: usize = input.iter().product();
                if n != d.in_width {
                    return Err(format!("expects {} inputs, got {n}", d.in_width));
                }
                Ok(vec![d.out_width])
            }
            Layer::Conv2d(c) => {
                let (ch, h, w) = conv_input_dims(input)?;
                if ch != c.in_channels {
                    return Err(format!("expects {} channels, got {ch}", c.in_channels));
                }
                if h < c.kernel || w < c.kernel {
                    return Err(format!("{h}x{w} input smaller than {0}x{0} kernel", c.kernel));
                }
                Ok(vec![
                    c.out_channels,
                    (h - c.kernel) / c.stride + 1,
                    (w - c.kernel) / c.stride + 1,
                ])
            }
            Layer::Relu | Layer::Sigmoid | Layer::Dropout { .. } => Ok(input.to_vec()),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Conv2d(c) => vec![&c.weight, &c.bias],
            _ => Vec::new(),
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            _ => Vec::new(),
        }
    }

    /// `x` is a batch `[B, ..sample]` whose sample shape already passed
    /// `output_shape`. `dropout_rng` is `Some` only in train mode.
    pub(crate) fn forward(
        &self,
        x: &Tensor,
        dropout_rng: Option<&mut ChaCha8Rng>,
        keep_cache: bool,
    ) -> (Tensor, Cache) {
        let b = x.rows();
        match self {
            Layer::Dense(d) => {
                let mut out = vec![0.0; b * d.out_width];
                for row in out.chunks_exact_mut(d.out_width) {
                    row.copy_from_slice(d.bias.data());
                }
                gemm(
                    b,
                    d.in_width,
                    d.out_width,
                    x.data(),
                    (d.in_width, 1),
                    d.weight.data(),
                    (1, d.in_width),
                    1.0,
                    &mut out,
                );
                let y = Tensor::new(vec![b, d.out_width], out).expect("dense output");
                let cache = if keep_cache {
                    Cache::Input(x.clone())
                } else {
                    Cache::None
                };
                (y, cache)
            }
            Layer::Conv2d(c) => conv_forward(c, x, keep_cache),
            Layer::Relu => {
                let y = x.map(|v| v.max(0.0));
                let cache = if keep_cache {
                    Cache::Input(x.clone())
                } else {
                    Cache::None
                };
                (y, cache)
            }
            Layer::Sigmoid => {
                let y = x.map(sigmoid);
                let cache = if keep_cache {
                    Cache::Output(y.clone())
                } else {
                    Cache::None
                };
                (y, cache)
            }
            Layer::Dropout { keep } => match dropout_rng {
                Some(rng) if *keep < 1.0 => {
                    let scale = 1.0 / keep;
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < *keep { scale } else { 0.0 })
                        .collect();
                    let mut y = x.clone();
                    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    (y, Cache::Mask(Some(mask)))
                }
                _ => (x.clone(), Cache::Mask(None)),
            },
        }
    }

    /// Returns the input gradient and accumulates parameter gradients into
    /// `param_grads` (one slot per entry of `params()`).
    pub(crate) fn backward(&self, cache: &Cache, dy: &Tensor, param_grads: &mut [Tensor]) -> Tensor {
        match (self, cache) {
            (Layer::Dense(d), Cache::Input(x)) => {
                let b = x.rows();
                let (gw, gb) = param_grads.split_at_mut(1);
                gemm(
                    d.out_width,
                    b,
                    d.in_width,
                    dy.data(),
                    (1, d.out_width),
                    x.data(),
                    (d.in_width, 1),
                    1.0,
                    gw[0].data_mut(),
                );
                let gb = gb[0].data_mut();
                for row in dy.data().chunks_exact(d.out_width) {
                    for (g, v) in gb.iter_mut().zip(row) {
                        *g += v;
                    }
                }
                let mut dx = vec![0.0; b * d.in_width];
                gemm(
                    b,
                    d.out_width,
                    d.in_width,
                    dy.data(),
                    (d.out_width, 1),
                    d.weight.data(),
                    (d.in_width, 1),
                    0.0,
                    &mut dx,
                );
                Tensor::new(x.shape().to_vec(), dx).expect("dense input grad")
            }
            (Layer::Conv2d(c), Cache::Columns { input_shape, cols }) => {
                conv_backward(c, input_shape, cols, dy, param_grads)
            }
            (Layer::Relu, Cache::Input(x)) => {
                let mut dx = dy.clone();
                for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
                dx
            }
            (Layer::Sigmoid, Cache::Output(y)) => {
                let mut dx = dy.clone();
                for (g, &s) in dx.data_mut().iter_mut().zip(y.data()) {
                    *g *= s * (1.0 - s);
                }
                dx
            }
            (Layer::Dropout { .. }, Cache::Mask(mask)) => match mask {
                Some(m) => {
                    let mut dx = dy.clone();
                    for (g, s) in dx.data_mut().iter_mut().zip(m) {
                        *g *= s;
                    }
                    dx
                }
                None => dy.clone(),
            },
            _ => unreachable!("trace cache kind is checked against the layer before backward"),
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn conv_input_dims(input: &[usize]) -> std::result::Result<(usize, usize, usize), String> {
    match *input {
        [h, w] => Ok((1, h, w)),
        [c, h, w] => Ok((c, h, w)),
        _ => Err(format!(
            "expects (channels, height, width) or (height, width), got {input:?}"
        )),
    }
}

struct ConvGeom {
    ch: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(c: &Conv2d, sample: &[usize]) -> Self {
        let (ch, h, w) = conv_input_dims(sample).expect("validated at construction");
        Self {
            ch,
            h,
            w,
            oh: (h - c.kernel) / c.stride + 1,
            ow: (w - c.kernel) / c.stride + 1,
        }
    }
}

/// Unrolls one sample into a `(ch·k·k, oh·ow)` matrix.
fn im2col(c: &Conv2d, g: &ConvGeom, x: &[f64], cols: &mut [f64]) {
    let k = c.kernel;
    let p = g.oh * g.ow;
    for ci in 0..g.ch {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let dst = &mut cols[r * p..(r + 1) * p];
                for oy in 0..g.oh {
                    let src = ci * g.h * g.w + (oy * c.stride + ky) * g.w + kx;
                    for ox in 0..g.ow {
                        dst[oy * g.ow + ox] = x[src + ox * c.stride];
                    }
                }
            }
        }
    }
}

fn col2im(c: &Conv2d, g: &ConvGeom, dcols: &[f64], dx: &mut [f64]) {
    let k = c.kernel;
    let p = g.oh * g.ow;
    for ci in 0..g.ch {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let src = &dcols[r * p..(r + 1) * p];
                for oy in 0..g.oh {
                    let dst = ci * g.h * g.w + (oy * c.stride + ky) * g.w + kx;
                    for ox in 0..g.ow {
                        dx[dst + ox * c.stride] += src[oy * g.ow + ox];
                    }
                }
            }
        }
    }
}

fn conv_forward(c: &Conv2d, x: &Tensor, keep_cache: bool) -> (Tensor, Cache) {
    let b = x.rows();
    let g = ConvGeom::new(c, &x.shape()[1..]);
    let rows = g.ch * c.kernel * c.kernel;
    let p = g.oh * g.ow;
    let mut cols = vec![0.0; b * rows * p];
    let mut out = vec![0.0; b * c.out_channels * p];
    for s in 0..b {
        let col = &mut cols[s * rows * p..(s + 1) * rows * p];
        im2col(c, &g, x.row(s), col);
        let y = &mut out[s * c.out_channels * p..(s + 1) * c.out_channels * p];
        for (o, plane) in y.chunks_exact_mut(p).enumerate() {
            plane.fill(c.bias.data()[o]);
        }
        gemm(c.out_channels, rows, p, c.weight.data(), (rows, 1), col, (p, 1), 1.0, y);
    }
    let y = Tensor::new(vec![b, c.out_channels, g.oh, g.ow], out).expect("conv output");
    let cache = if keep_cache {
        Cache::Columns {
            input_shape: x.shape().to_vec(),
            cols,
        }
    } else {
        Cache::None
    };
    (y, cache)
}

fn conv_backward(c: &Conv2d, input_shape: &[usize], cols: &[f64], dy: &Tensor, param_grads: &mut [Tensor]) -> Tensor {
    let b = input_shape[0];
    let g = ConvGeom::new(c, &input_shape[1..]);
    let rows = g.ch * c.kernel * c.kernel;
    let p = g.oh * g.ow;
    let sample_len = g.ch * g.h * g.w;
    let mut dx = vec![0.0; b * sample_len];
    let mut dcols = vec![0.0; rows * p];
    let (gw, gb) = param_grads.split_at_mut(1);
    for s in 0..b {
        let col = &cols[s * rows * p..(s + 1) * rows * p];
        let dys = dy.row(s);
        // dW += dY · colsᵀ
        gemm(c.out_channels, p, rows, dys, (p, 1), col, (1, p), 1.0, gw[0].data_mut());
        for (o, plane) in dys.chunks_exact(p).enumerate() {
            gb[0].data_mut()[o] += plane.iter().sum::<f64>();
        }
        // dcols = Wᵀ · dY
        gemm(
            rows,
            c.out_channels,
            p,
            c.weight.data(),
            (1, rows),
            dys,
            (p, 1),
            0.0,
            &mut dcols,
        );
        col2im(c, &g, &dcols, &mut dx[s * sample_len..(s + 1) * sample_len]);
    }
    Tensor::new(input_shape.to_vec(), dx).expect("conv input grad")
}

/// Dropout masks depend only on (seed, step, layer index) so a train-mode
/// forward is reproducible until the step counter advances.
pub(crate) fn dropout_rng(seed: u64, step: u64, layer: usize) -> ChaCha8Rng {
    let mix = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (layer as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mix)
}
