//! Command-line driver for configured pipeline runs, single stages,
//! ablation sweeps and report summaries.
//!
//! Settings come from built-in defaults, then the `--config` TOML file, then
//! command-line flags, each overriding the one before.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clad::eval::EvaluationReport;
use clad::pipeline::{ablation_sweep, run_pipeline, run_stage, AblationGrid, ExperimentConfig, Stage};
use clad::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "clad", version, about = "Self-labeling anomaly detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all artifacts plus report.json.
    Run(Settings),
    /// Run one stage against the artifacts already in --out.
    Stage {
        #[arg(value_enum)]
        stage: StageArg,
        #[command(flatten)]
        settings: Settings,
    },
    /// Sweep cluster counts and hidden sizes into ablation.csv.
    Ablate {
        #[command(flatten)]
        settings: Settings,
        /// TOML file with `clusters`, `hidden_dims` and/or `settings`.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Summarize the report.json in --out.
    Report {
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Extract,
    Cluster,
    Classify,
    Score,
    Evaluate,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Extract => Stage::Extract,
            StageArg::Cluster => Stage::Cluster,
            StageArg::Classify => Stage::Classify,
            StageArg::Score => Stage::Score,
            StageArg::Evaluate => Stage::Evaluate,
        }
    }
}

#[derive(Args)]
struct Settings {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// `synthetic` or a catalog scenario code such as CUR.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Settings {
    fn resolve(&self) -> clad::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(name) = &self.scenario {
            cfg.scenario.select(name);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(k) = self.clusters {
            cfg.clustering.clusters = k;
        }
        if let Some(h) = self.hidden_dim {
            cfg.autoencoder.hidden_dim = h;
        }
        if let Some(t) = self.temperature {
            cfg.detector.temperature = t;
        }
        if let Some(e) = self.epsilon {
            cfg.detector.epsilon = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(stage: Option<&str>) -> u8 {
    match stage {
        Some("config") => 2,
        Some("data") => 3,
        Some("extract") => 4,
        Some("cluster") => 5,
        Some("classify") => 6,
        Some("score") => 7,
        Some("evaluate") => 8,
        Some("ablate") => 9,
        Some("report") => 10,
        _ => 1,
    }
}

fn tagged(stage: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage,
            source: Box::new(e),
        },
    }
}

fn summarize(report: &EvaluationReport, out: &Path) {
    println!("scenario        {}", report.scenario);
    println!("train / test    {} / {}", report.train_samples, report.test_samples);
    println!("AUROC           {:.4}", report.auroc);
    if let Some(b) = report.baseline_auroc {
        println!("baseline AUROC  {b:.4}");
    }
    println!(
        "delta           {:.6} ({}) TPR {:.3} FPR {:.3} acc {:.3}",
        report.delta,
        if report.delta_from_config {
            "configured"
        } else {
            "Youden"
        },
        report.at_delta.tpr,
        report.at_delta.fpr,
        report.at_delta.accuracy
    );
    if !report.pseudo_label_counts.is_empty() {
        println!("pseudo-labels   {:?}", report.pseudo_label_counts);
    }
    println!("report          {}", out.join("report.json").display());
}

fn run(cli: Cli) -> clad::Result<()> {
    match cli.command {
        Command::Run(s) => {
            let cfg = s.resolve().map_err(tagged("config"))?;
            let report = run_pipeline(&cfg, &s.out)?;
            summarize(&report, &s.out);
        }
        Command::Stage { stage, settings } => {
            let cfg = settings.resolve().map_err(tagged("config"))?;
            let stage = Stage::from(stage);
            run_stage(stage, &cfg, &settings.out)?;
            println!("{} done -> {}", stage.name(), settings.out.display());
        }
        Command::Ablate { settings, grid } => {
            let cfg = settings.resolve().map_err(tagged("config"))?;
            let grid: AblationGrid = match grid {
                Some(path) => AblationGrid::load(&path).map_err(tagged("config"))?,
                None => cfg.ablation.clone(),
            };
            let rows = ablation_sweep(&cfg, &grid, &settings.out)?;
            println!("clusters  hidden_dim  auroc   runtime_s");
            for r in rows {
                println!(
                    "{:>8}  {:>10}  {:.4}  {:>9.1}",
                    r.clusters, r.hidden_dim, r.auroc, r.runtime_secs
                );
            }
        }
        Command::Report { out } => {
            let report = EvaluationReport::load(&out.join("report.json")).map_err(tagged("report"))?;
            summarize(&report, &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.stage();
            eprintln!("error: {e}");
            ExitCode::from(exit_code(stage))
        }
    }
}
