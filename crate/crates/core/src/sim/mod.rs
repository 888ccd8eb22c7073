//! Discrete-event simulation of an assembly session.

mod batch;
mod config;
mod kernel;
mod trace;
mod world;

pub use batch::{run_batch, BatchResult};
pub use config::{
    OperatorProfiles, PhysicalProfile, Policy, RobotTimings, Scenario, ScenarioConfig, ScenarioError, SpeechProfile, SCENARIO_VERSION,
};
pub use kernel::{run_scenario, OperatorKind, Sim, SimSnapshot};
pub use trace::{EndReason, RecordBody, RobotEventKind, Trace, TraceParseError, TraceRecord};
