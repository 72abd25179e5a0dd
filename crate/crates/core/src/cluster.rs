//! Self-labeling by deep embedded clustering.
//!
//! Latent features are softly assigned to centroids with a Student-t kernel
//! (one degree of freedom); a sharpened target distribution supervises a KL
//! objective that jointly moves the encoder and the centroids. The hard
//! assignment of each training sample becomes its pseudo-label.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{epoch_batches, Encoder};
use crate::nn::{Mode, Objective, ObjectiveEval, Optimizer, OptimizerConfig};
use crate::tensor::{argmax, Tensor};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K` centroids in latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    centroids: Tensor,
}

impl ClusterModel {
    /// `centroids` is `[K, dim]` with `K ≥ 2`, finite and pairwise distinct.
    pub fn new(centroids: Tensor) -> Result<Self> {
        if centroids.shape().len() != 2 {
            return Err(Error::Config(format!(
                "centroids must be a [K, dim] matrix, got {:?}",
                centroids.shape()
            )));
        }
        let model = Self { centroids };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 clusters, got {k}")));
        }
        self.centroids.ensure_finite("centroids")?;
        for a in 0..k {
            for b in a + 1..k {
                if sq_dist(self.centroids.row(a), self.centroids.row(b)).sqrt() <= 1e-9 {
                    return Err(Error::Data(format!("centroids {a} and {b} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.row_len()
    }

    pub fn centroids(&self) -> &Tensor {
        &self.centroids
    }

    /// Soft assignment of one latent vector.
    pub fn soft_assign(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Shape {
                expected: vec![self.dim()],
                actual: vec![z.len()],
            });
        }
        let mut q = vec![0.0; self.k()];
        soft_row(z, &self.centroids, &mut q);
        Ok(q)
    }

    /// Soft assignments `[N, K]` of a latent batch `[N, dim]`.
    pub fn soft_assign_batch(&self, z: &Tensor) -> Result<Tensor> {
        if z.shape().len() != 2 || z.row_len() != self.dim() {
            return Err(Error::Shape {
                expected: vec![z.shape()[0], self.dim()],
                actual: z.shape().to_vec(),
            });
        }
        Ok(soft_assign_matrix(z, &self.centroids))
    }
}

/// Student-t kernel weights `(1 + ‖z − μ_j‖²)⁻¹`, normalized into `q`.
fn soft_row(z: &[f64], centroids: &Tensor, q: &mut [f64]) {
    let mut sum = 0.0;
    for (j, qj) in q.iter_mut().enumerate() {
        *qj = 1.0 / (1.0 + sq_dist(z, centroids.row(j)));
        sum += *qj;
    }
    for qj in q.iter_mut() {
        *qj /= sum;
    }
}

fn soft_assign_matrix(z: &Tensor, centroids: &Tensor) -> Tensor {
    let k = centroids.rows();
    let n = z.rows();
    let mut q = Tensor::zeros(&[n, k]);
    for i in 0..n {
        soft_row(z.row(i), centroids, q.row_mut(i));
    }
    q
}

/// Sharpened targets `p_ij ∝ q_ij² / f_j` with soft frequencies
/// `f_j = Σ_i q_ij`.
pub fn target_distribution(q: &Tensor) -> Result<Tensor> {
    if q.shape().len() != 2 {
        return Err(Error::Shape {
            expected: vec![q.rows(), q.row_len()],
            actual: q.shape().to_vec(),
        });
    }
    let k = q.row_len();
    let mut freq = vec![0.0; k];
    for row in q.data().chunks_exact(k) {
        for (f, v) in freq.iter_mut().zip(row) {
            *f += v;
        }
    }
    let mut p = q.clone();
    for row in p.data_mut().chunks_exact_mut(k) {
        let mut sum = 0.0;
        for (v, f) in row.iter_mut().zip(&freq) {
            *v = *v * *v / f;
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(p)
}

/// `Σ_ij p_ij log(p_ij / q_ij)` with `0 · log 0 = 0`.
pub fn kl_loss(p: &Tensor, q: &Tensor) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::Shape {
            expected: p.shape().to_vec(),
            actual: q.shape().to_vec(),
        });
    }
    Ok(p.data()
        .iter()
        .zip(q.data())
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv).ln())
        .sum())
}

/// Batch-mean KL between a fixed target and the soft assignment of the
/// network output, with the centroids as trainable parameters.
#[derive(Debug, Clone)]
pub struct KlClustering {
    pub centroids: Tensor,
    pub target: Tensor,
}

impl Objective for KlClustering {
    fn evaluate(&self, z: &Tensor) -> Result<ObjectiveEval> {
        let (n, k, d) = (z.rows(), self.centroids.rows(), self.centroids.row_len());
        if z.shape().len() != 2 || z.row_len() != d || self.target.shape() != [n, k] {
            return Err(Error::Shape {
                expected: vec![self.target.rows(), d],
                actual: z.shape().to_vec(),
            });
        }
        let q = soft_assign_matrix(z, &self.centroids);
        let value = kl_loss(&self.target, &q)? / n as f64;
        let mut dz = Tensor::zeros(z.shape());
        let mut dmu = Tensor::zeros(self.centroids.shape());
        let scale = 2.0 / n as f64;
        for i in 0..n {
            let zi = z.row(i);
            for j in 0..k {
                let mu = self.centroids.row(j);
                let w = 1.0 / (1.0 + sq_dist(zi, mu));
                let c = scale * w * (self.target.row(i)[j] - q.row(i)[j]);
                if c == 0.0 {
                    continue;
                }
                let gz = dz.row_mut(i);
                for t in 0..d {
                    gz[t] += c * (zi[t] - mu[t]);
                }
                let gm = dmu.row_mut(j);
                for t in 0..d {
                    gm[t] -= c * (zi[t] - mu[t]);
                }
            }
        }
        Ok(ObjectiveEval {
            value,
            output_grad: dz,
            param_grads: vec![dmu],
        })
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.centroids]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 300,
        }
    }
}

fn distinct_rows(z: &Tensor) -> usize {
    let mut rows: Vec<&[f64]> = (0..z.rows()).map(|i| z.row(i)).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup();
    rows.len()
}

fn kmeans_pp(z: &Tensor, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = z.rows();
    let mut centers = vec![z.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut pick = n - 1;
        let mut target = rng.random::<f64>() * total;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 && target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        // Fall back to the farthest point if rounding walked off the end.
        if d2[pick] == 0.0 {
            pick = argmax(&d2);
        }
        let c = z.row(pick).to_vec();
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(z.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd iterations from a seeding; returns centers and inertia.
fn lloyd(z: &Tensor, mut centers: Vec<Vec<f64>>, max_iter: usize) -> (Vec<Vec<f64>>, f64) {
    let (n, d, k) = (z.rows(), z.row_len(), centers.len());
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, a) in assign.iter_mut().enumerate() {
            let (j, _) = nearest(z.row(i), &centers);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            // An emptied cluster keeps its previous center.
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    let inertia = (0..n).map(|i| nearest(z.row(i), &centers).1).sum();
    (centers, inertia)
}

/// k-means++ seeded Lloyd clustering, best inertia over restarts.
pub fn init_centroids(z: &Tensor, k: usize, seed: u64) -> Result<ClusterModel> {
    init_centroids_with(z, k, seed, &KMeansConfig::default())
}

pub fn init_centroids_with(z: &Tensor, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<ClusterModel> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 clusters, got {k}")));
    }
    if z.shape().len() != 2 {
        return Err(Error::Shape {
            expected: vec![z.rows(), z.row_len()],
            actual: z.shape().to_vec(),
        });
    }
    if z.rows() < k {
        return Err(Error::Data(format!("{} samples cannot form {k} clusters", z.rows())));
    }
    z.ensure_finite("latent features")?;
    let distinct = distinct_rows(z);
    if distinct < k {
        return Err(Error::Data(format!("only {distinct} distinct points for {k} clusters")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let seeds = kmeans_pp(z, k, &mut rng);
        let (centers, inertia) = lloyd(z, seeds, cfg.max_iter);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((centers, inertia));
        }
    }
    let (centers, _) = best.expect("at least one restart");
    let data = centers.into_iter().flatten().collect();
    ClusterModel::new(Tensor::new(vec![k, z.row_len()], data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRefresh {
    /// Recompute the target from the whole training set once per epoch.
    Epoch,
    /// Recompute it from each minibatch's own soft assignments.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub target_refresh: TargetRefresh,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            optimizer: OptimizerConfig::sgd(0.01, 0.9),
            target_refresh: TargetRefresh::Epoch,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reseed {
    pub epoch: usize,
    pub cluster: usize,
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refined {
    pub encoder: Encoder,
    pub clusters: ClusterModel,
    /// `KL(P‖Q)/N` over the whole training set at the start of each epoch,
    /// followed by the value after the last epoch.
    pub kl_history: Vec<f64>,
    /// Empty clusters re-seeded at an epoch boundary.
    pub reseeds: Vec<Reseed>,
}

fn hard_assign(q: &Tensor) -> Vec<usize> {
    (0..q.rows()).map(|i| argmax(q.row(i))).collect()
}

/// Moves clusters that received no samples onto the least confidently
/// assigned samples.
fn reseed_empty(q: &Tensor, z: &Tensor, centroids: &mut Tensor, epoch: usize) -> Vec<Reseed> {
    let k = centroids.rows();
    let mut counts = vec![0usize; k];
    for a in hard_assign(q) {
        counts[a] += 1;
    }
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if empty.is_empty() {
        return Vec::new();
    }
    let mut by_confidence: Vec<(f64, usize)> = (0..q.rows())
        .map(|i| (q.row(i).iter().copied().fold(0.0, f64::max), i))
        .collect();
    by_confidence.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    empty
        .into_iter()
        .zip(by_confidence)
        .map(|(cluster, (_, sample))| {
            centroids.row_mut(cluster).copy_from_slice(z.row(sample));
            Reseed { epoch, cluster, sample }
        })
        .collect()
}

/// Jointly fine-tunes the encoder and the centroids on the KL objective.
///
/// The encoder runs with dropout off throughout.
pub fn refine(encoder: &Encoder, clusters: &ClusterModel, x_train: &Tensor, cfg: &RefineConfig) -> Result<Refined> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("refine epochs and batch_size must be positive".into()));
    }
    cfg.optimizer.validate()?;
    crate::features::check_sample_shape(&encoder.sample_shape, x_train)?;
    if clusters.dim() != encoder.hidden_dim() {
        return Err(Error::Shape {
            expected: vec![clusters.k(), encoder.hidden_dim()],
            actual: clusters.centroids().shape().to_vec(),
        });
    }
    let mut enc = encoder.clone();
    enc.net.set_mode(Mode::Eval);
    let xs = enc.scaling.apply(x_train);
    let n = xs.rows();
    let mut objective = KlClustering {
        centroids: clusters.centroids().clone(),
        target: Tensor::zeros(&[1, clusters.k()]),
    };
    let mut opt = Optimizer::new(cfg.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut reseeds = Vec::new();
    for epoch in 0..cfg.epochs {
        let z = enc.net.predict(&xs)?;
        let mut q = soft_assign_matrix(&z, &objective.centroids);
        let moved = reseed_empty(&q, &z, &mut objective.centroids, epoch);
        if !moved.is_empty() {
            q = soft_assign_matrix(&z, &objective.centroids);
            reseeds.extend(moved);
        }
        let p = target_distribution(&q)?;
        history.push(kl_loss(&p, &q)? / n as f64);
        for idx in epoch_batches(n, cfg.batch_size, &mut rng) {
            let xb = xs.select_rows(&idx);
            let (zb, trace) = enc.net.forward(&xb)?;
            objective.target = match cfg.target_refresh {
                TargetRefresh::Epoch => p.select_rows(&idx),
                TargetRefresh::Batch => target_distribution(&soft_assign_matrix(&zb, &objective.centroids))?,
            };
            let eval = objective.evaluate(&zb)?;
            let grads = enc.net.backward(&trace, &eval.output_grad)?;
            let all: Vec<Tensor> = grads.params.into_iter().chain(eval.param_grads).collect();
            let mut params = enc.net.params_mut();
            params.push(&mut objective.centroids);
            opt.step(&mut params, &all)?;
        }
        objective.centroids.ensure_finite("centroid refinement")?;
    }
    let z = enc.net.predict(&xs)?;
    let q = soft_assign_matrix(&z, &objective.centroids);
    history.push(kl_loss(&target_distribution(&q)?, &q)? / n as f64);
    Ok(Refined {
        encoder: enc,
        clusters: ClusterModel::new(objective.centroids)?,
        kl_history: history,
        reseeds,
    })
}

/// Cluster index per training sample (`0..K`) plus per-cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl PseudoLabels {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn distinct(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }

    /// CSV with `sample_index,pseudo_label` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("sample_index,pseudo_label\n");
        for (i, l) in self.labels.iter().enumerate() {
            text.push_str(&format!("{i},{l}\n"));
        }
        crate::io::write_text(path, &text)
    }

    pub fn read_csv(path: &Path, k: usize) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut labels = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let bad = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: row + 2,
                reason,
            };
            let idx: usize = record
                .get(0)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad sample index".into()))?;
            let label: usize = record
                .get(1)
                .and_then(|v| v.parse().ok())
                .filter(|&l| l < k)
                .ok_or_else(|| bad(format!("pseudo-label must be an integer below {k}")))?;
            if idx != labels.len() {
                return Err(bad(format!("expected sample index {}", labels.len())));
            }
            labels.push(label);
        }
        Ok(Self { labels, k })
    }
}

/// Hard assignment `argmax_j q_ij` (ties to the lowest index).
pub fn assign_pseudo_labels(encoder: &Encoder, clusters: &ClusterModel, x: &Tensor) -> Result<PseudoLabels> {
    let z = encoder.encode(x)?;
    let q = clusters.soft_assign_batch(&z)?;
    Ok(PseudoLabels {
        labels: hard_assign(&q),
        k: clusters.k(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(vec![rows, cols], data.to_vec()).unwrap()
    }

    fn model(data: &[f64], d: usize) -> ClusterModel {
        ClusterModel::new(mat(data.len() / d, d, data)).unwrap()
    }

    #[test]
    fn equidistant_point_is_uniform() {
        let m = model(&[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0], 2);
        let q = m.soft_assign(&[0.0, 0.0]).unwrap();
        for v in q {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_closed_form() {
        let m = model(&[0.0, 1.0], 1);
        let q = m.soft_assign(&[0.0]).unwrap();
        assert!((q[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((q[1] - 1.0 / 3.0).abs() < 1e-15);
        let far = model(&[0.0, 1000.0], 1);
        assert!(far.soft_assign(&[0.0]).unwrap()[0] > 0.999);
    }

    #[test]
    fn fewer_than_two_clusters_rejected() {
        assert!(ClusterModel::new(mat(1, 2, &[0.0, 0.0])).is_err());
        let z = mat(3, 1, &[0.0, 1.0, 2.0]);
        assert!(init_centroids(&z, 1, 0).is_err());
    }

    #[test]
    fn coincident_centroids_rejected() {
        assert!(ClusterModel::new(mat(2, 2, &[1.0, 1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn too_few_points_or_distinct_points() {
        let z = mat(2, 1, &[0.0, 1.0]);
        assert!(init_centroids(&z, 3, 0).is_err());
        let dup = mat(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        assert!(init_centroids(&dup, 3, 0).is_err());
    }

    #[test]
    fn k_distinct_points_are_their_own_centroids() {
        let pts = [0.0, 0.0, 5.0, 1.0, -3.0, 4.0, 2.0, -6.0];
        let z = mat(4, 2, &pts);
        let m = init_centroids(&z, 4, 11).unwrap();
        let mut got: Vec<Vec<f64>> = (0..4).map(|j| m.centroids().row(j).to_vec()).collect();
        let mut want: Vec<Vec<f64>> = pts.chunks(2).map(<[f64]>::to_vec).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn initialization_is_seeded() {
        let z = mat(6, 1, &[0.0, 0.1, 0.2, 5.0, 5.1, 9.0]);
        assert_eq!(init_centroids(&z, 3, 4).unwrap(), init_centroids(&z, 3, 4).unwrap());
    }

    #[test]
    fn uniform_q_gives_uniform_p() {
        let q = Tensor::filled(&[3, 4], 0.25);
        let p = target_distribution(&q).unwrap();
        for v in p.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_row_target_is_fixed_point() {
        let p = target_distribution(&mat(1, 2, &[0.8, 0.2])).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
        assert!((p.data()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_row_target_by_hand() {
        // f = [1.4, 0.6]; row 0: [0.81/1.4, 0.01/0.6]; row 1: [0.25/1.4, 0.25/0.6]
        let p = target_distribution(&mat(2, 2, &[0.9, 0.1, 0.5, 0.5])).unwrap();
        let r0 = [0.81 / 1.4, 0.01 / 0.6];
        let r1 = [0.25 / 1.4, 0.25 / 0.6];
        let s0 = r0[0] + r0[1];
        let s1 = r1[0] + r1[1];
        let want = [r0[0] / s0, r0[1] / s0, r1[0] / s1, r1[1] / s1];
        for (a, b) in p.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_values() {
        let q = mat(1, 2, &[0.3, 0.7]);
        assert_eq!(kl_loss(&q, &q).unwrap(), 0.0);
        let v = kl_loss(&mat(1, 2, &[1.0, 0.0]), &mat(1, 2, &[0.5, 0.5])).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(kl_loss(&q, &mat(1, 3, &[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn ties_go_to_lowest_cluster() {
        let q = mat(2, 3, &[0.4, 0.4, 0.2, 0.2, 0.4, 0.4]);
        assert_eq!(hard_assign(&q), vec![0, 1]);
    }

    #[test]
    fn empty_cluster_is_reseeded_on_least_confident_sample() {
        let z = mat(3, 1, &[0.0, 0.1, 0.5]);
        let mut centroids = mat(2, 1, &[0.0, 100.0]);
        let q = soft_assign_matrix(&z, &centroids);
        let moves = reseed_empty(&q, &z, &mut centroids, 4);
        assert_eq!(
            moves,
            vec![Reseed {
                epoch: 4,
                cluster: 1,
                sample: 2
            }]
        );
        assert_eq!(centroids.row(1), &[0.5]);
    }

    #[test]
    fn pseudo_label_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        let labels = PseudoLabels {
            labels: vec![0, 2, 1, 1],
            k: 3,
        };
        labels.write_csv(&p).unwrap();
        assert_eq!(PseudoLabels::read_csv(&p, 3).unwrap(), labels);
        assert_eq!(labels.counts(), vec![1, 2, 1]);
        assert!(PseudoLabels::read_csv(&p, 2).is_err());
    }
}
