//! End-to-end experiment driver: configuration, staged runs with persisted
//! artifacts, and ablation sweeps.
//!
//! Every random draw derives from the root seed through [`stage_seed`], so a
//! stage's seed does not depend on which other stages ran.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{train_classifier, ClassifierConfig, ClassifierModel, ClassifierPreset};
use crate::cluster::{
    assign_pseudo_labels, init_centroids_with, refine, KMeansConfig, PseudoLabels, RefineConfig, Refined,
};
use crate::data::{
    build_scenario, builtin_scenario_tables, import_labeled_vectors, load_mnist_dir, synth_gaussian_mixture,
    GaussianMode, LabeledDataset, Scenario, ScenarioSpec, Split,
};
use crate::detector::{read_scores_csv, score, write_scores_csv, AnomalyScore, DetectorConfig};
use crate::error::{Error, Result};
use crate::eval::{
    anomaly_evidence, auroc, class_summaries, evaluate_at, one_class_baseline, threshold_sweep, EvaluationReport,
};
use crate::features::{train_autoencoder, AutoencoderConfig, AutoencoderModel, AutoencoderPreset};
use crate::nn::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extract,
    Cluster,
    Classify,
    Score,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Extract,
        Stage::Cluster,
        Stage::Classify,
        Stage::Score,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Cluster => "cluster",
            Stage::Classify => "classify",
            Stage::Score => "score",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Independent streams of the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    TrainData,
    TestData,
    Autoencoder,
    KMeans,
    Refine,
    Classifier,
}

pub fn stage_seed(root: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream as u64 + 1);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub train: usize,
    pub test: usize,
    /// Standard deviation of every mode.
    pub spread: f64,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            train: 300,
            test: 500,
            spread: 0.5,
        }
    }
}

impl SyntheticScenario {
    /// Normal modes sit on a triangle of side 6. One abnormal mode lies
    /// midway between the first two normal modes; the other lies outside the
    /// triangle, level with its apex.
    pub const NORMAL_MEANS: [[f64; 2]; 3] = [[0.0, 0.0], [6.0, 0.0], [3.0, 5.196152422706632]];
    pub const ABNORMAL_MEANS: [[f64; 2]; 2] = [[3.0, 0.0], [-3.0, 5.196152422706632]];

    fn modes(&self, total: usize, means: &[[f64; 2]]) -> Vec<GaussianMode> {
        let per = total / means.len();
        let extra = total % means.len();
        means
            .iter()
            .enumerate()
            .map(|(i, m)| GaussianMode::isotropic(m.to_vec(), self.spread, per + usize::from(i < extra), i as u32))
            .collect()
    }

    fn build(&self, root: u64) -> Result<Scenario> {
        if self.train == 0 || self.test < 5 {
            return Err(Error::Config("synthetic scenario needs train > 0 and test ≥ 5".into()));
        }
        let train = synth_gaussian_mixture(
            &self.modes(self.train, &Self::NORMAL_MEANS),
            stage_seed(root, SeedStream::TrainData),
            Split::Train,
        )?;
        let all: Vec<[f64; 2]> = Self::NORMAL_MEANS
            .iter()
            .chain(&Self::ABNORMAL_MEANS)
            .copied()
            .collect();
        let test = synth_gaussian_mixture(
            &self.modes(self.test, &all),
            stage_seed(root, SeedStream::TestData),
            Split::Test,
        )?;
        build_scenario(
            &train,
            &test,
            &ScenarioSpec::new("tri-modal", "synthetic", vec![0, 1, 2]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MnistScenario {
    pub data_dir: PathBuf,
    /// Catalog code, used when `normal` is absent.
    pub code: String,
    pub normal: Option<Vec<u32>>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl Default for MnistScenario {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/mnist"),
            code: "CUR".into(),
            normal: None,
            train_limit: Some(2000),
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorScenario {
    pub train_csv: PathBuf,
    pub test_csv: PathBuf,
    /// Catalog dataset and code, used when `normal` is absent.
    pub dataset: Option<String>,
    pub code: Option<String>,
    /// Label alphabet for catalogs without a built-in one.
    pub alphabet: Option<Vec<String>>,
    pub normal: Option<Vec<u32>>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Synthetic(SyntheticScenario),
    Mnist(MnistScenario),
    Vectors(VectorScenario),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::Synthetic(SyntheticScenario::default())
    }
}

fn limited(s: Scenario, train: Option<usize>, test: Option<usize>) -> Result<Scenario> {
    let s = match train {
        Some(n) => s.truncate_train(n)?,
        None => s,
    };
    match test {
        Some(n) => s.truncate_test(n),
        None => Ok(s),
    }
}

fn resolve_spec(
    dataset: &str,
    code: Option<&str>,
    normal: Option<&Vec<u32>>,
    alphabet: Option<&Vec<String>>,
) -> Result<ScenarioSpec> {
    if let Some(normal) = normal {
        let name = code.unwrap_or("custom");
        return Ok(ScenarioSpec::new(name, dataset, normal.clone()));
    }
    let code = code.ok_or_else(|| Error::Config("scenario needs `code` or `normal`".into()))?;
    let catalog = builtin_scenario_tables();
    match alphabet {
        Some(a) => catalog
            .get(dataset, code)
            .ok_or_else(|| Error::Config(format!("unknown scenario {dataset}/{code}")))?
            .resolve_with(a),
        None => catalog.resolve(dataset, code),
    }
}

impl ScenarioConfig {
    pub fn load(&self, root_seed: u64) -> Result<Scenario> {
        match self {
            ScenarioConfig::Synthetic(s) => s.build(root_seed),
            ScenarioConfig::Mnist(m) => {
                let spec = resolve_spec("mnist", Some(&m.code), m.normal.as_ref(), None)?;
                let (train, test) = load_mnist_dir(&m.data_dir)?;
                limited(build_scenario(&train, &test, &spec)?, m.train_limit, m.test_limit)
            }
            ScenarioConfig::Vectors(v) => {
                let dataset = v.dataset.as_deref().unwrap_or("vectors");
                let spec = resolve_spec(dataset, v.code.as_deref(), v.normal.as_ref(), v.alphabet.as_ref())?;
                let train: LabeledDataset = import_labeled_vectors(&v.train_csv, Split::Train)?;
                let test = import_labeled_vectors(&v.test_csv, Split::Test)?;
                limited(build_scenario(&train, &test, &spec)?, v.train_limit, v.test_limit)
            }
        }
    }

    /// Points the scenario at another catalog code (or `synthetic`).
    pub fn select(&mut self, name: &str) {
        if name.eq_ignore_ascii_case("synthetic") {
            *self = ScenarioConfig::Synthetic(SyntheticScenario::default());
            return;
        }
        match self {
            ScenarioConfig::Mnist(m) => {
                m.code = name.to_string();
                m.normal = None;
            }
            ScenarioConfig::Vectors(v) => {
                v.code = Some(name.to_string());
                v.normal = None;
            }
            ScenarioConfig::Synthetic(_) => {
                *self = ScenarioConfig::Mnist(MnistScenario {
                    code: name.to_string(),
                    ..MnistScenario::default()
                });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub clusters: usize,
    pub kmeans: KMeansConfig,
    pub refine: RefineConfig,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            clusters: 10,
            kmeans: KMeansConfig::default(),
            refine: RefineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    /// Also score the distance-to-mean baseline on the autoencoder latents.
    pub baseline: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { baseline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationGrid {
    /// Cluster counts swept at the base `hidden_dim`.
    pub clusters: Vec<usize>,
    /// Hidden sizes swept at the base cluster count.
    pub hidden_dims: Vec<usize>,
    /// Explicit `(clusters, hidden_dim)` pairs; replaces both sweeps when set.
    pub settings: Vec<(usize, usize)>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        Self {
            clusters: (1..=10).map(|i| 2 * i).collect(),
            hidden_dims: vec![10, 50, 100],
            settings: Vec::new(),
        }
    }
}

impl AblationGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    /// Settings in sweep order, without duplicates.
    pub fn expand(&self, base_k: usize, base_hidden: usize) -> Vec<(usize, usize)> {
        let raw: Vec<(usize, usize)> = if self.settings.is_empty() {
            self.clusters
                .iter()
                .map(|&k| (k, base_hidden))
                .chain(self.hidden_dims.iter().map(|&h| (base_k, h)))
                .collect()
        } else {
            self.settings.clone()
        };
        let mut out: Vec<(usize, usize)> = Vec::new();
        for s in raw {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub autoencoder: AutoencoderConfig,
    pub clustering: ClusteringConfig,
    pub classifier: ClassifierConfig,
    pub detector: DetectorConfig,
    pub evaluation: EvaluationConfig,
    pub ablation: AblationGrid,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.autoencoder.validate()?;
        if self.clustering.clusters < 2 {
            return Err(Error::Config(format!(
                "need at least 2 clusters, got {}",
                self.clustering.clusters
            )));
        }
        self.clustering.refine.optimizer.validate()?;
        self.classifier.validate()?;
        self.detector.validate()
    }

    /// Small networks for the 2-D tri-modal mixture.
    pub fn synthetic_preset() -> Self {
        Self {
            scenario: ScenarioConfig::Synthetic(SyntheticScenario::default()),
            autoencoder: AutoencoderConfig {
                preset: AutoencoderPreset::Mlp { hidden: vec![32] },
                hidden_dim: 2,
                epochs: 100,
                batch_size: 32,
                optimizer: OptimizerConfig::adam(0.01),
                dropout_keep: 1.0,
                seed: 0,
            },
            clustering: ClusteringConfig {
                clusters: 3,
                ..ClusteringConfig::default()
            },
            classifier: ClassifierConfig {
                preset: ClassifierPreset::Mlp { hidden: vec![64, 32] },
                epochs: 100,
                batch_size: 32,
                optimizer: OptimizerConfig::adam(1e-3),
                seed: 0,
            },
            detector: DetectorConfig::default(),
            ..Self::default()
        }
    }

    /// Desk-scale MNIST CUR with the default MLP presets.
    pub fn mnist_preset(data_dir: &Path) -> Self {
        Self {
            scenario: ScenarioConfig::Mnist(MnistScenario {
                data_dir: data_dir.to_path_buf(),
                ..MnistScenario::default()
            }),
            detector: DetectorConfig {
                clamp: Some((0.0, 1.0)),
                ..DetectorConfig::default()
            },
            ..Self::default()
        }
    }

    /// The configuration each stage actually trains with, seeds included.
    pub fn effective(&self) -> Self {
        let mut cfg = self.clone();
        cfg.autoencoder.seed = stage_seed(self.seed, SeedStream::Autoencoder);
        cfg.clustering.refine.seed = stage_seed(self.seed, SeedStream::Refine);
        cfg.classifier.seed = stage_seed(self.seed, SeedStream::Classifier);
        cfg
    }
}

/// File layout of a run directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join("config.toml")
    }

    pub fn autoencoder(&self) -> PathBuf {
        self.dir.join("autoencoder.json")
    }

    pub fn refined(&self) -> PathBuf {
        self.dir.join("refined.json")
    }

    pub fn pseudo_labels(&self) -> PathBuf {
        self.dir.join("pseudo_labels.csv")
    }

    pub fn classifier(&self) -> PathBuf {
        self.dir.join("classifier.json")
    }

    pub fn scores(&self) -> PathBuf {
        self.dir.join("scores.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }

    pub fn timings(&self) -> PathBuf {
        self.dir.join("timings.json")
    }
}

pub fn extract(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<AutoencoderModel> {
    train_autoencoder(scenario.train(), &cfg.effective().autoencoder).map_err(|e| e.in_stage("extract"))
}

pub fn cluster(cfg: &ExperimentConfig, scenario: &Scenario, ae: &AutoencoderModel) -> Result<(Refined, PseudoLabels)> {
    let run = || -> Result<(Refined, PseudoLabels)> {
        let eff = cfg.effective();
        let z = ae.encode(scenario.train())?;
        let init = init_centroids_with(
            &z,
            eff.clustering.clusters,
            stage_seed(cfg.seed, SeedStream::KMeans),
            &eff.clustering.kmeans,
        )?;
        let refined = refine(&ae.encoder, &init, scenario.train(), &eff.clustering.refine)?;
        let labels = assign_pseudo_labels(&refined.encoder, &refined.clusters, scenario.train())?;
        Ok((refined, labels))
    };
    run().map_err(|e| e.in_stage("cluster"))
}

pub fn classify(cfg: &ExperimentConfig, scenario: &Scenario, labels: &PseudoLabels) -> Result<ClassifierModel> {
    train_classifier(scenario.train(), labels, &cfg.effective().classifier).map_err(|e| e.in_stage("classify"))
}

pub fn score_test(cfg: &ExperimentConfig, scenario: &Scenario, model: &ClassifierModel) -> Result<Vec<AnomalyScore>> {
    score(model, scenario.test(), &cfg.detector).map_err(|e| e.in_stage("score"))
}

/// Inputs to the evaluation stage beyond the scores themselves.
#[derive(Debug, Default)]
pub struct EvaluationContext<'a> {
    pub autoencoder: Option<&'a AutoencoderModel>,
    pub pseudo_labels: Option<&'a PseudoLabels>,
    pub classifier: Option<&'a ClassifierModel>,
    pub stage_seconds: Vec<(String, f64)>,
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    scores: &[AnomalyScore],
    ctx: EvaluationContext<'_>,
) -> Result<EvaluationReport> {
    let run = || -> Result<EvaluationReport> {
        let labels = scenario.test_labels();
        let s: Vec<f64> = scores.iter().map(|a| a.s).collect();
        let value = auroc(&anomaly_evidence(&s), labels)?;
        let sweep = threshold_sweep(&s, labels)?;
        let (delta, delta_from_config) = match cfg.detector.delta {
            Some(d) => (d, true),
            None => (sweep.youden.delta, false),
        };
        let baseline_auroc = match (cfg.evaluation.baseline, ctx.autoencoder) {
            (true, Some(ae)) => {
                let evidence = one_class_baseline(&ae.encode(scenario.train())?, &ae.encode(scenario.test())?)?;
                Some(auroc(&evidence, labels)?)
            }
            _ => None,
        };
        Ok(EvaluationReport {
            orientation: crate::eval::ORIENTATION.to_string(),
            scenario: scenario.spec().name.clone(),
            normal_classes: scenario.spec().normal.clone(),
            train_samples: scenario.train().rows(),
            test_samples: scenario.test().rows(),
            abnormal_ratio: scenario.abnormal_ratio(),
            auroc: value,
            baseline_auroc,
            delta,
            delta_from_config,
            at_delta: evaluate_at(&s, labels, delta)?,
            youden: sweep.youden,
            pseudo_label_counts: ctx.pseudo_labels.map(PseudoLabels::counts).unwrap_or_default(),
            classifier_train_accuracy: ctx.classifier.and_then(|c| c.accuracy_history.last().copied()),
            per_class: class_summaries(&s, scenario.oracle().test_classes(), labels)?,
            stage_seconds: ctx.stage_seconds,
            config: serde_json::to_value(cfg.effective())?,
        })
    };
    run().map_err(|e| e.in_stage("evaluate"))
}

fn load_scenario(cfg: &ExperimentConfig) -> Result<Scenario> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    cfg.scenario.load(cfg.seed).map_err(|e| e.in_stage("data"))
}

fn record_timing(art: &Artifacts, stage: Stage, secs: f64) -> Result<()> {
    let mut t: BTreeMap<String, f64> = if art.timings().exists() {
        crate::io::read_json(&art.timings())?
    } else {
        BTreeMap::new()
    };
    t.insert(stage.name().to_string(), secs);
    crate::io::write_json(&art.timings(), &t)
}

fn saved_timings(art: &Artifacts) -> Vec<(String, f64)> {
    let t: BTreeMap<String, f64> = crate::io::read_json(&art.timings()).unwrap_or_default();
    Stage::ALL
        .iter()
        .filter_map(|s| t.get(s.name()).map(|v| (s.name().to_string(), *v)))
        .collect()
}

/// Runs one stage against the artifacts already in `out`.
pub fn run_stage(stage: Stage, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let scenario = load_scenario(cfg)?;
    run_stage_on(stage, cfg, &scenario, &Artifacts::new(out))
}

fn upstream<T>(stage: Stage, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage.name()))
}

fn run_stage_on(stage: Stage, cfg: &ExperimentConfig, scenario: &Scenario, art: &Artifacts) -> Result<()> {
    let start = Instant::now();
    let tag = |r: Result<()>| r.map_err(|e| e.in_stage(stage.name()));
    tag(fs::create_dir_all(&art.dir).map_err(|e| Error::io(&art.dir, e)))?;
    tag(cfg
        .effective()
        .to_toml_string()
        .and_then(|t| crate::io::write_text(&art.config(), &t)))?;
    match stage {
        Stage::Extract => {
            let ae = extract(cfg, scenario)?;
            tag(ae.save(&art.autoencoder()))?;
        }
        Stage::Cluster => {
            let ae = upstream(stage, AutoencoderModel::load(&art.autoencoder()))?;
            let (refined, labels) = cluster(cfg, scenario, &ae)?;
            tag(crate::io::write_json(&art.refined(), &refined))?;
            tag(labels.write_csv(&art.pseudo_labels()))?;
        }
        Stage::Classify => {
            let labels = upstream(
                stage,
                PseudoLabels::read_csv(&art.pseudo_labels(), cfg.clustering.clusters),
            )?;
            let model = classify(cfg, scenario, &labels)?;
            tag(model.save(&art.classifier()))?;
        }
        Stage::Score => {
            let model = upstream(stage, ClassifierModel::load(&art.classifier()))?;
            let scores = score_test(cfg, scenario, &model)?;
            tag(write_scores_csv(&art.scores(), &scores, scenario.test_labels()))?;
        }
        Stage::Evaluate => {
            let (scores, labels) = upstream(stage, read_scores_csv(&art.scores()))?;
            if labels != scenario.test_labels() {
                return Err(Error::Data(format!(
                    "{} does not match the scenario's test labels",
                    art.scores().display()
                ))
                .in_stage("evaluate"));
            }
            let ae = art
                .autoencoder()
                .exists()
                .then(|| AutoencoderModel::load(&art.autoencoder()));
            let ae = upstream(stage, ae.transpose())?;
            let pl = art
                .pseudo_labels()
                .exists()
                .then(|| PseudoLabels::read_csv(&art.pseudo_labels(), cfg.clustering.clusters));
            let pl = upstream(stage, pl.transpose())?;
            let clf = art
                .classifier()
                .exists()
                .then(|| ClassifierModel::load(&art.classifier()));
            let clf = upstream(stage, clf.transpose())?;
            let ctx = EvaluationContext {
                autoencoder: ae.as_ref(),
                pseudo_labels: pl.as_ref(),
                classifier: clf.as_ref(),
                stage_seconds: saved_timings(art),
            };
            let report = evaluate(cfg, scenario, &scores, ctx)?;
            tag(report.save(&art.report()))?;
        }
    }
    tag(record_timing(art, stage, start.elapsed().as_secs_f64()))
}

/// Runs every stage in order, persisting each artifact under `out`.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<EvaluationReport> {
    let scenario = load_scenario(cfg)?;
    let art = Artifacts::new(out);
    for stage in Stage::ALL {
        run_stage_on(stage, cfg, &scenario, &art)?;
    }
    upstream(Stage::Evaluate, EvaluationReport::load(&art.report()))
}

/// Runs every stage in memory and returns the report without writing files.
pub fn run_in_memory(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<(EvaluationReport, Vec<AnomalyScore>)> {
    let ae = extract(cfg, scenario)?;
    run_after_extract(cfg, scenario, &ae)
}

fn run_after_extract(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    ae: &AutoencoderModel,
) -> Result<(EvaluationReport, Vec<AnomalyScore>)> {
    let (_, labels) = cluster(cfg, scenario, ae)?;
    let model = classify(cfg, scenario, &labels)?;
    let scores = score_test(cfg, scenario, &model)?;
    let ctx = EvaluationContext {
        autoencoder: Some(ae),
        pseudo_labels: Some(&labels),
        classifier: Some(&model),
        stage_seconds: Vec::new(),
    };
    let report = evaluate(cfg, scenario, &scores, ctx)?;
    Ok((report, scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub clusters: usize,
    pub hidden_dim: usize,
    pub auroc: f64,
    /// Wall time of the setting, excluding autoencoder training shared with
    /// other settings of the same `hidden_dim`.
    pub runtime_secs: f64,
}

const ABLATION_HEADER: &str = "clusters,hidden_dim,auroc,runtime_secs";

fn read_ablation_rows(path: &Path) -> Result<Vec<AblationRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let parsed = (cells.len() == 4)
            .then(|| -> Option<AblationRow> {
                Some(AblationRow {
                    clusters: cells[0].parse().ok()?,
                    hidden_dim: cells[1].parse().ok()?,
                    auroc: cells[2].parse().ok()?,
                    runtime_secs: cells[3].parse().ok()?,
                })
            })
            .flatten();
        match parsed {
            Some(r) => rows.push(r),
            // A torn final line from an interrupted write is dropped.
            None if i + 1 == text.lines().count() && !text.ends_with('\n') => {}
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("expected {ABLATION_HEADER}"),
                })
            }
        }
    }
    Ok(rows)
}

fn write_ablation_rows(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut text = format!("{ABLATION_HEADER}\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.clusters, r.hidden_dim, r.auroc, r.runtime_secs
        ));
    }
    crate::io::write_text(path, &text)
}

/// One seeded pipeline run per grid setting, appended to
/// `out/ablation.csv`. Settings already present in that file are skipped,
/// so an interrupted sweep resumes where it stopped.
pub fn ablation_sweep(cfg: &ExperimentConfig, grid: &AblationGrid, out: &Path) -> Result<Vec<AblationRow>> {
    let settings = grid.expand(cfg.clustering.clusters, cfg.autoencoder.hidden_dim);
    if settings.is_empty() {
        return Err(Error::Config("ablation grid is empty".into()).in_stage("ablate"));
    }
    let path = out.join("ablation.csv");
    let mut rows = read_ablation_rows(&path).map_err(|e| e.in_stage("ablate"))?;
    rows.retain(|r| settings.contains(&(r.clusters, r.hidden_dim)));
    write_ablation_rows(&path, &rows).map_err(|e| e.in_stage("ablate"))?;
    let pending: Vec<(usize, usize)> = settings
        .iter()
        .copied()
        .filter(|&(k, h)| !rows.iter().any(|r| r.clusters == k && r.hidden_dim == h))
        .collect();
    if pending.is_empty() {
        return Ok(order_rows(rows, &settings));
    }
    let scenario = load_scenario(cfg)?;
    let mut cache: HashMap<usize, AutoencoderModel> = HashMap::new();
    for (k, h) in pending {
        let mut run_cfg = cfg.clone();
        run_cfg.clustering.clusters = k;
        run_cfg.autoencoder.hidden_dim = h;
        run_cfg.validate().map_err(|e| e.in_stage("config"))?;
        if let Entry::Vacant(slot) = cache.entry(h) {
            let ae_path = out.join(format!("ablation_autoencoder_h{h}.json"));
            let ae = match AutoencoderModel::load(&ae_path) {
                Ok(ae) if ae.config == run_cfg.effective().autoencoder => ae,
                _ => {
                    let ae = extract(&run_cfg, &scenario)?;
                    ae.save(&ae_path).map_err(|e| e.in_stage("ablate"))?;
                    ae
                }
            };
            slot.insert(ae);
        }
        let start = Instant::now();
        let (report, _) = run_after_extract(&run_cfg, &scenario, &cache[&h])?;
        let row = AblationRow {
            clusters: k,
            hidden_dim: h,
            auroc: report.auroc,
            runtime_secs: start.elapsed().as_secs_f64(),
        };
        let mut file = fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e).in_stage("ablate"))?;
        writeln!(
            file,
            "{},{},{},{}",
            row.clusters, row.hidden_dim, row.auroc, row.runtime_secs
        )
        .map_err(|e| Error::io(&path, e).in_stage("ablate"))?;
        rows.push(row);
    }
    Ok(order_rows(rows, &settings))
}

fn order_rows(rows: Vec<AblationRow>, settings: &[(usize, usize)]) -> Vec<AblationRow> {
    settings
        .iter()
        .filter_map(|&(k, h)| rows.iter().find(|r| r.clusters == k && r.hidden_dim == h).copied())
        .collect()
}
