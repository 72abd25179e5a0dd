//! Central-difference verification of analytic gradients.

use super::loss::Objective;
use super::network::Network;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `|a − b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn loss_at(net: &Network, objective: &dyn Objective, batch: &Tensor) -> Result<f64> {
    Ok(objective.evaluate(&net.predict(batch)?)?.value)
}

/// Worst relative error between analytic and central-difference gradients
/// over every network parameter, every objective parameter, and every input
/// value.
///
/// The network is evaluated in its current mode; parameters are restored
/// bit-exactly afterwards.
pub fn grad_check(net: &mut Network, objective: &mut dyn Objective, batch: &Tensor, fd_step: f64) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(Error::Config(format!("fd_step must be positive, got {fd_step}")));
    }
    let (out, trace) = net.forward(batch)?;
    let eval = objective.evaluate(&out)?;
    let grads = net.backward(&trace, &eval.output_grad)?;
    let two_h = 2.0 * fd_step;
    let mut worst: f64 = 0.0;

    let n_params = net.params().len();
    for p in 0..n_params {
        let len = net.params()[p].len();
        for i in 0..len {
            let orig = net.params()[p].data()[i];
            net.params_mut()[p].data_mut()[i] = orig + fd_step;
            let plus = loss_at(net, objective, batch)?;
            net.params_mut()[p].data_mut()[i] = orig - fd_step;
            let minus = loss_at(net, objective, batch)?;
            net.params_mut()[p].data_mut()[i] = orig;
            worst = worst.max(relative_error(grads.params[p].data()[i], (plus - minus) / two_h));
        }
    }

    let n_obj = eval.param_grads.len();
    for p in 0..n_obj {
        let len = objective.params_mut()[p].len();
        for i in 0..len {
            let orig = objective.params_mut()[p].data()[i];
            objective.params_mut()[p].data_mut()[i] = orig + fd_step;
            let plus = loss_at(net, objective, batch)?;
            objective.params_mut()[p].data_mut()[i] = orig - fd_step;
            let minus = loss_at(net, objective, batch)?;
            objective.params_mut()[p].data_mut()[i] = orig;
            worst = worst.max(relative_error(eval.param_grads[p].data()[i], (plus - minus) / two_h));
        }
    }

    let mut x = batch.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + fd_step;
        let plus = loss_at(net, objective, &x)?;
        x.data_mut()[i] = orig - fd_step;
        let minus = loss_at(net, objective, &x)?;
        x.data_mut()[i] = orig;
        worst = worst.max(relative_error(grads.input.data()[i], (plus - minus) / two_h));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{CrossEntropy, Layer, Mode, Mse, ZeroLoss};

    fn random_batch(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn dense_relu_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut net = Network::new(
            vec![4],
            vec![
                Layer::dense(4, 5, &mut rng).unwrap(),
                Layer::Relu,
                Layer::dense(5, 3, &mut rng).unwrap(),
            ],
        )
        .unwrap();
        let x = random_batch(&mut rng, &[3, 4]);
        let mut loss = Mse {
            target: random_batch(&mut rng, &[3, 3]),
        };
        let err = grad_check(&mut net, &mut loss, &x, 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn identity_net_zero_loss() {
        let mut net = Network::new(vec![3], vec![]).unwrap();
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(grad_check(&mut net, &mut ZeroLoss, &x, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn conv_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::new(
            vec![1, 6, 6],
            vec![
                Layer::conv2d(1, 2, 3, 1, &mut rng).unwrap(),
                Layer::Sigmoid,
                Layer::dense(2 * 4 * 4, 3, &mut rng).unwrap(),
            ],
        )
        .unwrap();
        let x = random_batch(&mut rng, &[2, 1, 6, 6]);
        let mut loss = CrossEntropy { labels: vec![0, 2] };
        let err = grad_check(&mut net, &mut loss, &x, 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn train_mode_dropout_is_checkable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Network::new(
            vec![3],
            vec![
                Layer::dense(3, 6, &mut rng).unwrap(),
                Layer::Sigmoid,
                Layer::dropout(0.7).unwrap(),
                Layer::dense(6, 2, &mut rng).unwrap(),
            ],
        )
        .unwrap();
        net.set_mode(Mode::Train);
        net.set_dropout_seed(3);
        let x = random_batch(&mut rng, &[4, 3]);
        let mut loss = Mse {
            target: random_batch(&mut rng, &[4, 2]),
        };
        let err = grad_check(&mut net, &mut loss, &x, 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn rejects_non_positive_step() {
        let mut net = Network::new(vec![1], vec![]).unwrap();
        let x = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert!(grad_check(&mut net, &mut ZeroLoss, &x, 0.0).is_err());
    }
}
