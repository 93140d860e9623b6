//! End-to-end two-agent experiment driven by a JSON config.
//!
//! Each agent samples its own region of the true function and fits locally;
//! only `ψ`-coefficient vectors tagged with the basis digest travel to and
//! from the fusion center. A run leaves these files in the output
//! directory:
//!
//! | file | contents |
//! |---|---|
//! | `config.json` | the resolved config |
//! | `operators.json` | fusion basis transform `T` and `L̄ⁱ`, `√L̄ⁱ` |
//! | `messages.jsonl` | upload and download messages, one per line |
//! | `metrics.json` | grid errors, norms, fusion weights, seeds |
//! | `estimates.csv` | all estimates on the evaluation grid |
//!
//! [`replay_fusion`] recomputes the fusion-center side from these files
//! alone.

pub mod artifacts;
pub mod config;
pub mod data;
pub mod messages;
pub mod metrics;
mod run;

pub use artifacts::{emit_plot_data, OperatorsArtifact};
pub use config::{AgentConfig, EvaluationConfig, ExperimentConfig, FusionConfig, TrueFunction};
pub use data::generate_data;
pub use messages::{Direction, TransferMessage};
pub use metrics::{EstimateMetrics, MetricsReport, PerEstimate, ESTIMATE_NAMES};
pub use run::{
    build_basis, fit_agent, fusion_center, receive_download, replay_fusion, run_pipeline, CenterOutput, LocalFit,
    PipelineRun, ReplayReport, REPLAY_TOL,
};
