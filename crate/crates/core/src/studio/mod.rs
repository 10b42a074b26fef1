//! Pipeline orchestration, workspace persistence, reports and the HTTP service.

mod artifacts;
mod config;
mod report;
mod service;
mod stages;
mod workspace;

pub use artifacts::{CandidateRecord, ItemStatus, LabelRow, LatentRow, MapMeta, SimulatedLabels};
pub use config::{
    Build3dConfig, EmbeddingKind, ExplainConfig, GenerateConfig, PipelineConfig, ReduceConfig, ServeConfig,
    SimulateConfig, TrainStageConfig, WORKSPACE_ENV,
};
pub use report::{cluster_color, export_report, group_color, ReportIndex};
pub use service::{router, serve, AppState};
pub use stages::{read_plan, run_all, run_stage, StageOutcome};
pub use workspace::{sha256_hex, RunManifest, Stage, Workspace, TOOL_VERSION, UNHASHED};
