//! Scenario files, closed-loop runs, metrics and exported artifacts.

pub mod export;
pub mod format;
pub mod metrics;
pub mod run;
pub mod scenario;
pub mod svg;

pub use export::{export, parse_formats, to_csv, ExportFormat};
pub use format::{fmt_g, fmt_g9};
pub use metrics::{metrics, PairSummary, Summary, VehicleSummary};
pub use run::{run, Frame, PairRecord, TrajectoryLog, VehicleRecord};
pub use scenario::{
    load_scenario, parse_scenario, read_scenario_file, Guards, LeaderConfig, MetricsConfig,
    Perturbation, Placement, PoseConfig, Scenario, ScenarioConfig,
};
