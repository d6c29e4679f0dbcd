//! Experiment drivers.

pub mod commands;
pub mod compare;
pub mod config;

pub use commands::{
    cmd_compare_policies, cmd_predict, cmd_report, cmd_simulate, cmd_train_hmm, render_report,
    InterfaceTraining, PredictSummary, SimulateSummary, SummaryRow,
};
pub use compare::{
    compare_policies, format_percent, reduction_percent, Comparison, EvaluationReport,
    InterfaceAccuracy, PolicySummary, Reduction, TimelineRow,
};
pub use config::{label_fold, HarnessConfig, M4Config, Overrides, PolicyKind, TrainingConfig};
