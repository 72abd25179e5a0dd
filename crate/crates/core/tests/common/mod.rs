#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use clad::cluster::KlClustering;
use clad::data::idx::{encode_images, encode_labels, IdxError};
use clad::data::{load_idx, load_mnist_dir, Split};
use clad::nn::{grad_check, CrossEntropy, Layer, Mode, Mse, Network, Objective};
use clad::{Error, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;

pub fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

fn randomize_biases(net: &mut Network, rng: &mut ChaCha8Rng) {
    for p in net.params_mut() {
        if p.shape().len() == 1 {
            for v in p.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
}

fn check(net: &mut Network, objective: &mut dyn Objective, batch: &Tensor) -> f64 {
    grad_check(net, objective, batch, FD_STEP).unwrap()
}

/// Worst relative error per layer-kind/loss combination for one seed.
/// Every case also checks the input gradient.
pub fn gradient_suite(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut net = Network::new(
        vec![4],
        vec![
            Layer::dense(4, 5, &mut rng).unwrap(),
            Layer::Relu,
            Layer::dense(5, 3, &mut rng).unwrap(),
        ],
    )
    .unwrap();
    randomize_biases(&mut net, &mut rng);
    let x = random_tensor(&mut rng, &[3, 4], 1.0);
    let mut mse = Mse {
        target: random_tensor(&mut rng, &[3, 3], 1.0),
    };
    out.push(("dense+relu / mse", check(&mut net, &mut mse, &x)));

    let mut net = Network::new(
        vec![3],
        vec![
            Layer::dense(3, 4, &mut rng).unwrap(),
            Layer::Sigmoid,
            Layer::dense(4, 3, &mut rng).unwrap(),
        ],
    )
    .unwrap();
    randomize_biases(&mut net, &mut rng);
    let x = random_tensor(&mut rng, &[4, 3], 2.0);
    let labels = (0..4).map(|_| rng.random_range(0..3)).collect();
    let mut ce = CrossEntropy { labels };
    out.push(("dense+sigmoid / cross-entropy", check(&mut net, &mut ce, &x)));

    let mut net = Network::new(
        vec![2, 6, 6],
        vec![
            Layer::conv2d(2, 3, 3, 1, &mut rng).unwrap(),
            Layer::Relu,
            Layer::conv2d(3, 2, 2, 2, &mut rng).unwrap(),
            Layer::dense(8, 3, &mut rng).unwrap(),
        ],
    )
    .unwrap();
    randomize_biases(&mut net, &mut rng);
    let x = random_tensor(&mut rng, &[2, 2, 6, 6], 1.0);
    let labels = (0..2).map(|_| rng.random_range(0..3)).collect();
    let mut ce = CrossEntropy { labels };
    out.push(("conv2d+relu+dense / cross-entropy", check(&mut net, &mut ce, &x)));

    let mut net = Network::new(
        vec![5],
        vec![
            Layer::dense(5, 6, &mut rng).unwrap(),
            Layer::Sigmoid,
            Layer::dropout(0.7).unwrap(),
            Layer::dense(6, 5, &mut rng).unwrap(),
            Layer::Sigmoid,
        ],
    )
    .unwrap();
    randomize_biases(&mut net, &mut rng);
    net.set_mode(Mode::Train);
    net.set_dropout_seed(seed);
    let x = random_tensor(&mut rng, &[3, 5], 1.0);
    let mut mse = Mse {
        target: random_tensor(&mut rng, &[3, 5], 1.0).map(f64::abs),
    };
    out.push(("dropout(train)+sigmoid / mse", check(&mut net, &mut mse, &x)));

    let mut net = Network::new(vec![4], vec![Layer::dense(4, 2, &mut rng).unwrap()]).unwrap();
    randomize_biases(&mut net, &mut rng);
    let x = random_tensor(&mut rng, &[5, 4], 1.5);
    let centroids = random_tensor(&mut rng, &[3, 2], 1.5);
    let q = clad::cluster::ClusterModel::new(centroids.clone())
        .unwrap()
        .soft_assign_batch(&net.predict(&x).unwrap())
        .unwrap();
    let target = clad::cluster::target_distribution(&q).unwrap();
    let mut kl = KlClustering { centroids, target };
    out.push(("dense / kl-clustering (+centroids)", check(&mut net, &mut kl, &x)));

    out
}

/// O(n²) reference: P(a_abnormal > a_normal) + ½ P(tie).
pub fn pairwise_auroc(evidence: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1;
            if evidence[i] > evidence[j] {
                credit += 1.0;
            } else if evidence[i] == evidence[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs as f64
}

/// Random scored set of 2..=100 points with both labels and many ties.
pub fn random_scored_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=100);
    let levels = rng.random_range(1..=20);
    let evidence: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
        .collect();
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    (evidence, labels)
}

pub fn idx_kind(err: &Error) -> &'static str {
    match err {
        Error::Idx(IdxError::BadMagic { .. }) => "bad-magic",
        Error::Idx(IdxError::TruncatedHeader { .. }) => "truncated-header",
        Error::Idx(IdxError::TruncatedImages { .. }) => "truncated-images",
        Error::Idx(IdxError::TruncatedLabels { .. }) => "truncated-labels",
        Error::Idx(IdxError::TrailingBytes { .. }) => "trailing-bytes",
        Error::Idx(IdxError::WrongDims { .. }) => "wrong-dims",
        Error::Idx(IdxError::CountMismatch { .. }) => "count-mismatch",
        _ => "other",
    }
}

pub fn mnist_like(dir: &Path, n_train: usize, rows: usize, cols: usize) {
    let pixels: Vec<u8> = (0..n_train * rows * cols).map(|i| (i % 256) as u8).collect();
    let labels: Vec<u8> = (0..n_train).map(|i| (i % 10) as u8).collect();
    fs::write(dir.join("train-images-idx3-ubyte"), encode_images(rows, cols, &pixels)).unwrap();
    fs::write(dir.join("train-labels-idx1-ubyte"), encode_labels(&labels)).unwrap();
    fs::write(dir.join("t10k-images-idx3-ubyte"), encode_images(rows, cols, &pixels)).unwrap();
    fs::write(dir.join("t10k-labels-idx1-ubyte"), encode_labels(&labels)).unwrap();
}

/// The five corruption cases each produce their own error kind.
pub fn corrupt_cases(dir: &Path) -> Vec<(&'static str, Error)> {
    let pixels = vec![7u8; 3 * 4];
    let good_images = encode_images(2, 2, &pixels);
    let good_labels = encode_labels(&[1, 2, 3]);
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    };
    let good_img = write("good-images", &good_images);
    let good_lab = write("good-labels", &good_labels);

    let mut bad_magic = good_images.clone();
    bad_magic[3] = 0x01;
    let bad_magic = write("bad-magic", &bad_magic);
    let truncated = write("truncated", &good_images[..good_images.len() - 5]);
    let short_labels = write("short-labels", &good_labels[..good_labels.len() - 1]);
    let two_labels = write("two-labels", &encode_labels(&[1, 2]));

    let wrong_dims = dir.join("wrong-dims");
    fs::create_dir_all(&wrong_dims).unwrap();
    mnist_like(&wrong_dims, 3, 27, 28);

    vec![
        ("bad magic", load_idx(&bad_magic, &good_lab, Split::Train).unwrap_err()),
        (
            "truncated images",
            load_idx(&truncated, &good_lab, Split::Train).unwrap_err(),
        ),
        (
            "count mismatch",
            load_idx(&good_img, &two_labels, Split::Train).unwrap_err(),
        ),
        ("wrong dimensions", load_mnist_dir(&wrong_dims).unwrap_err()),
        (
            "short labels",
            load_idx(&good_img, &short_labels, Split::Train).unwrap_err(),
        ),
    ]
}
