mod common;

use clad::cluster::{init_centroids, kl_loss, refine, target_distribution, ClusterModel, RefineConfig};
use clad::data::{synth_gaussian_mixture, GaussianMode, Split};
use clad::eval::{anomaly_evidence, auroc, one_class_baseline, threshold_sweep};
use clad::features::{Encoder, InputScaling};
use clad::nn::{softmax_with_temperature, Layer, Network};
use clad::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{pairwise_auroc, random_scored_set};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

fn row_sums_are_one(t: &Tensor) -> bool {
    (0..t.rows()).all(|i| (t.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9)
}

fn blobs(seed: u64, means: &[[f64; 2]], per: usize, sd: f64) -> (Tensor, Vec<u32>) {
    let modes: Vec<GaussianMode> = means
        .iter()
        .enumerate()
        .map(|(i, m)| GaussianMode::isotropic(m.to_vec(), sd, per, i as u32))
        .collect();
    let ds = synth_gaussian_mixture(&modes, seed, Split::Train).unwrap();
    (ds.samples().clone(), ds.labels().to_vec())
}

fn identity_encoder(dim: usize) -> Encoder {
    let mut w = Tensor::zeros(&[dim, dim]);
    for i in 0..dim {
        w.data_mut()[i * dim + i] = 1.0;
    }
    Encoder {
        net: Network::new(vec![dim], vec![Layer::dense_from(w, Tensor::zeros(&[dim])).unwrap()]).unwrap(),
        scaling: InputScaling { lo: 0.0, hi: 1.0 },
        sample_shape: vec![dim],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_rows_sum_to_one(logits in finite_vec(12), t in 0.01f64..5000.0) {
        let x = Tensor::new(vec![3, 4], logits).unwrap();
        let p = softmax_with_temperature(&x, t).unwrap();
        prop_assert!(row_sums_are_one(&p));
        prop_assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn soft_assignment_and_target_rows_sum_to_one(
        z in finite_vec(10),
        mu in finite_vec(6),
    ) {
        let mut mu = mu;
        mu[0] += 1000.0;
        mu[2] -= 1000.0;
        let model = ClusterModel::new(Tensor::new(vec![3, 2], mu).unwrap()).unwrap();
        let q = model.soft_assign_batch(&Tensor::new(vec![5, 2], z).unwrap()).unwrap();
        prop_assert!(row_sums_are_one(&q));
        let p = target_distribution(&q).unwrap();
        prop_assert!(row_sums_are_one(&p));
        prop_assert!(kl_loss(&p, &q).unwrap() >= -1e-12);
    }

    #[test]
    fn kmeans_is_translation_equivariant(shift in prop::array::uniform2(-100.0f64..100.0), seed in 0u64..50) {
        let (x, _) = blobs(seed, &[[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]], 20, 0.3);
        let mut moved = x.clone();
        for i in 0..moved.rows() {
            let r = moved.row_mut(i);
            r[0] += shift[0];
            r[1] += shift[1];
        }
        let a = init_centroids(&x, 3, seed).unwrap();
        let b = init_centroids(&moved, 3, seed).unwrap();
        for j in 0..3 {
            let (ca, cb) = (a.centroids().row(j), b.centroids().row(j));
            prop_assert!((ca[0] + shift[0] - cb[0]).abs() < 1e-6);
            prop_assert!((ca[1] + shift[1] - cb[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn auroc_matches_pairwise_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, y) = random_scored_set(&mut rng);
        prop_assert!((auroc(&a, &y).unwrap() - pairwise_auroc(&a, &y)).abs() <= 1e-12);
    }

    #[test]
    fn auroc_is_rank_invariant_and_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, y) = random_scored_set(&mut rng);
        let base = auroc(&a, &y).unwrap();
        let transformed: Vec<f64> = a.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert!((auroc(&transformed, &y).unwrap() - base).abs() <= 1e-12);
        let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
        prop_assert!((auroc(&a, &flipped).unwrap() - (1.0 - base)).abs() <= 1e-12);
    }

    #[test]
    fn threshold_sweep_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, y) = random_scored_set(&mut rng);
        let s: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
        let sweep = threshold_sweep(&s, &y).unwrap();
        for w in sweep.points.windows(2) {
            prop_assert!(w[0].delta < w[1].delta);
            prop_assert!(w[0].tpr <= w[1].tpr && w[0].fpr <= w[1].fpr);
        }
        let first = sweep.points.first().unwrap();
        let last = sweep.points.last().unwrap();
        prop_assert_eq!((first.tpr, first.fpr), (0.0, 0.0));
        prop_assert_eq!((last.tpr, last.fpr), (1.0, 1.0));
    }
}

#[test]
fn perfect_separation_has_a_perfect_threshold() {
    let s = [0.9, 0.95, 0.99, 0.1, 0.2];
    let y = [0, 0, 0, 1, 1];
    let sweep = threshold_sweep(&s, &y).unwrap();
    assert_eq!((sweep.youden.tpr, sweep.youden.fpr), (1.0, 0.0));
    assert_eq!(auroc(&anomaly_evidence(&s), &y).unwrap(), 1.0);
}

#[test]
fn tied_scores_count_half_and_swapped_labels_invert() {
    // normals s = {0.9, 0.8}, abnormals s = {0.8, 0.1}
    let a = anomaly_evidence(&[0.9, 0.8, 0.8, 0.1]);
    assert_eq!(auroc(&a, &[0, 0, 1, 1]).unwrap(), 0.875);
    assert_eq!(auroc(&a, &[1, 1, 0, 0]).unwrap(), 0.125);
}

#[test]
fn two_blobs_centroids_match_blob_means() {
    let (x, labels) = blobs(4, &[[-3.0, 0.0], [3.0, 1.0]], 100, 0.5);
    let m = init_centroids(&x, 2, 0).unwrap();
    for class in 0..2u32 {
        let idx: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == class).collect();
        let mean: Vec<f64> = (0..2)
            .map(|d| idx.iter().map(|&i| x.row(i)[d]).sum::<f64>() / idx.len() as f64)
            .collect();
        let best = (0..2)
            .map(|j| {
                let c = m.centroids().row(j);
                ((c[0] - mean[0]).powi(2) + (c[1] - mean[1]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.1, "{best}");
    }
}

#[test]
fn refinement_descends_and_labels_are_pure_on_separated_blobs() {
    let (x, labels) = blobs(9, &[[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]], 60, 0.4);
    let enc = identity_encoder(2);
    let init = init_centroids(&x, 3, 1).unwrap();
    let cfg = RefineConfig {
        epochs: 30,
        batch_size: 32,
        ..RefineConfig::default()
    };
    let r = refine(&enc, &init, &x, &cfg).unwrap();
    assert_eq!(r.kl_history.len(), 31);
    assert!(r.kl_history.last().unwrap() < &r.kl_history[0], "{:?}", r.kl_history);
    let pl = clad::cluster::assign_pseudo_labels(&r.encoder, &r.clusters, &x).unwrap();
    let mut agree = 0;
    for c in 0..3 {
        let mut counts = [0usize; 3];
        for (i, &l) in pl.labels.iter().enumerate() {
            if l == c {
                counts[labels[i] as usize] += 1;
            }
        }
        agree += counts.iter().max().unwrap();
    }
    assert!(agree as f64 / x.rows() as f64 >= 0.95, "{agree}");
}

#[test]
fn baseline_evidence_is_non_negative_and_zero_at_mean() {
    let (x, _) = blobs(2, &[[1.0, 2.0], [3.0, -1.0]], 30, 1.0);
    let mut mean = [0.0; 2];
    for i in 0..x.rows() {
        mean[0] += x.row(i)[0] / x.rows() as f64;
        mean[1] += x.row(i)[1] / x.rows() as f64;
    }
    let test = Tensor::new(vec![2, 2], vec![mean[0], mean[1], 10.0, 10.0]).unwrap();
    let e = one_class_baseline(&x, &test).unwrap();
    assert!(e[0] < 1e-12);
    assert!(e.iter().all(|&v| v >= 0.0));
}
