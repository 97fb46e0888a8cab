//! Evaluation protocol: dominance masks, metrics, scene sampling and
//! perturbation, and the batch experiment driver.

mod experiment;
mod mask;
mod metrics;
mod scenario;
mod speech;

pub use experiment::{
    concentration_gain, draw_mixture, mixture_seed, padded_ctf, room_slot_seed, run_experiment, sample_scene,
    scenario_rir, scene_rirs, simulate_room, Band, ExperimentConfig, ExperimentReport, Failure, RawArtifact, ReportRow,
    RoomDiagnostics, RoomSetup, RowKey, RunOptions, REPORT_HEADER, ROOMS_HEADER,
};
pub use mask::{dominance_mask, DominanceMask, Label, ENERGY_FLOOR_DB};
pub use metrics::{auc, feature_metrics, log_power_spectrum, pearson, MetricsRow};
pub use scenario::{perturb_scenario, ScenarioKind, ScenarioSpec, Scene, WALL_CLEARANCE};
pub use speech::synthetic_utterance;
