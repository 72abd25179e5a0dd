//! A small double-precision network engine: layers with hand-written
//! backward passes, losses, optimizers and a finite-difference checker.

mod gemm;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;

pub use gradcheck::{grad_check, relative_error};
pub use layer::{Conv2d, Dense, Layer};
pub use loss::{
    mse_per_sample, softmax_into, softmax_with_temperature, CrossEntropy, Mse, Objective, ObjectiveEval, ZeroLoss,
    LOG_FLOOR,
};
pub use network::{Gradients, Mode, Network, Trace};
pub use optim::{Optimizer, OptimizerConfig};
