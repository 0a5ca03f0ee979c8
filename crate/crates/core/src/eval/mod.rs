//! Metrics, splits, cross-validation and result tables.

pub mod cv;
pub mod human;
pub mod metrics;
pub mod split;
pub mod stats;
pub mod table;

pub use cv::{loocv, summarize, CvConfig, CvSummary, FoldResult, MeanStd};
pub use human::{aggregate_human_baseline, ConditionBaseline};
pub use metrics::{accuracy, evaluate, evaluate_binary, f1_macro, f1_score, mae, DimensionMetrics, F1Average, MetricsReport};
pub use split::{make_split, SampleKey, SplitCounts, SplitSpec};
pub use stats::{dimension_correlations, pearson_r, stratified_error, PhaseErrors};
pub use table::ResultsTable;
