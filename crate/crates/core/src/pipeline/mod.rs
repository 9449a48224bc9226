//! End-to-end orchestration: configuration, artifact IO and the day loop.

pub mod artifacts;
pub mod config;
pub mod run;

pub use artifacts::{FlowExport, GraphExport, RcaEntry, RcaExport};
pub use config::{PipelineConfig, ShiftSource, SCHEMA_VERSION};
pub use run::{
    attribute_day, build_day_graph, day_delta, flow_day, run_day, run_range, run_range_with,
    score_day, DayOutputs, Dataset, RunManifest,
};
