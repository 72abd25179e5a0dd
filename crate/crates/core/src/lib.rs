//! Confidence-based self-labeling anomaly detection.
//!
//! The pipeline trains an autoencoder on unlabeled normal data, clusters its
//! latent space into pseudo-classes, trains a classifier on those
//! pseudo-labels, and scores test samples by the classifier's
//! temperature-scaled, input-perturbed maximum softmax probability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cluster;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
