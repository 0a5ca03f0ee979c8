use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use navimpress::features::FeatureSet;
use navimpress::models::{hyper_grid, ForestConfig, Hyperparams, ModelKind, NetworkArch};

#[derive(Debug, Parser)]
#[command(name = "navimpress", version, about = "Simulate guided-navigation sessions and predict user impressions of the robot")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded study session and write the labelled dataset.
    Simulate(SimulateArgs),
    /// Fit a model on the training split and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Leave-one-participant-out cross-validation.
    Loocv(LoocvArgs),
    /// Write one replay trace per sample.
    ExportTraces(ExportArgs),
    /// Build an annotation assignment plan for a dataset.
    Plan(PlanArgs),
    /// Serve traces and collect annotations over HTTP.
    Serve(ServeArgs),
    /// Write the built-in warehouse map.
    MakeMap(MakeMapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Features {
    Facial,
    Nav,
    Both,
}

impl From<Features> for FeatureSet {
    fn from(f: Features) -> Self {
        match f {
            Features::Facial => FeatureSet::FacialOnly,
            Features::Nav => FeatureSet::NavOnly,
            Features::Both => FeatureSet::NavPlusFacial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Random,
    Rf,
    Mlp,
    Gnn,
    Transformer,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Random => ModelKind::Random,
            Model::Rf => ModelKind::RandomForest,
            Model::Mlp => ModelKind::Network(NetworkArch::Mlp),
            Model::Gnn => ModelKind::Network(NetworkArch::Gnn),
            Model::Transformer => ModelKind::Network(NetworkArch::Transformer),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 60)]
    pub participants: usize,
    #[arg(long, default_value_t = 4)]
    pub tasks: usize,
    /// Map file; the built-in warehouse when omitted [default: built-in warehouse]
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Average queries per episode; 0 queries at every pause
    #[arg(long, default_value_t = navimpress::sim::session::DEFAULT_QUERIES_PER_EPISODE)]
    pub queries_per_episode: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset (JSON lines)
    #[arg(long)]
    pub out: PathBuf,
}

/// Hyperparameter grid and forest settings shared by `train` and `loocv`.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Learning rates searched
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.0003")]
    pub lr: Vec<f64>,
    /// Batch sizes searched
    #[arg(long, value_delimiter = ',', default_value = "32,64")]
    pub batch_size: Vec<usize>,
    /// Dropout rates searched
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3")]
    pub dropout: Vec<f64>,
    /// Hidden width [default: 64 for mlp, 16 for gnn and transformer]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Hidden layers, message-passing rounds or encoder layers
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Trees per random forest
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
}

impl GridArgs {
    pub fn grid(&self, kind: ModelKind) -> Vec<Hyperparams> {
        let ModelKind::Network(arch) = kind else {
            return Vec::new();
        };
        let d = arch.default_hyperparams();
        let base = Hyperparams {
            hidden: self.hidden.unwrap_or(d.hidden),
            layers: self.layers,
            max_epochs: self.max_epochs,
            patience: self.patience,
            ..d
        };
        hyper_grid(base, &self.lr, &self.batch_size, &self.dropout)
    }

    pub fn forest(&self) -> ForestConfig {
        ForestConfig { n_trees: self.trees, ..ForestConfig::default() }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Model::Rf)]
    pub model: Model,
    #[arg(long, value_enum, default_value_t = Features::Nav)]
    pub features: Features,
    /// Seed for the split and for model fitting
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output checkpoint
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training report as JSON [default: not written]
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Score low versus medium/high instead of the five-point ratings [default: off]
    #[arg(long)]
    pub binary: bool,
    /// Report mean absolute error separately for Before and After samples [default: off]
    #[arg(long)]
    pub stratify_phase: bool,
    /// Which part of the split to score
    #[arg(long, value_enum, default_value_t = SplitPart::Test)]
    pub split: SplitPart,
    /// Split seed; use the seed the model was trained with
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the results table (TSV) [default: stdout only]
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Write the full report (JSON) [default: not written]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoocvArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Model::Rf)]
    pub model: Model,
    #[arg(long, value_enum, default_value_t = Features::Nav)]
    pub features: Features,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Folds run concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write per-fold results and the summary (JSON) [default: not written]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Conditions annotators are assigned to
    #[arg(long, value_enum, value_delimiter = ',', default_value = "facial,nav,both")]
    pub conditions: Vec<Features>,
    /// Annotators per sample in each condition
    #[arg(long, default_value_t = navimpress::annotate::DEFAULT_ANNOTATORS_PER_SAMPLE)]
    pub per_sample: usize,
    /// Samples in each annotator's queue
    #[arg(long, default_value_t = 20)]
    pub per_annotator: usize,
    /// Which samples to annotate
    #[arg(long, value_enum, default_value_t = SplitPart::Test)]
    pub samples: SplitPart,
    /// Split seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// Annotation log, appended to and replayed on start
    #[arg(long, default_value = "annotations.log")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeMapArgs {
    #[arg(long)]
    pub out: PathBuf,
}
