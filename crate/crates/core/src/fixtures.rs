//! The shipped reference gearbox scenario, embedded for tests and tools.

use std::path::PathBuf;

use crate::assembly::AssemblyPlan;
use crate::intent::Corpus;
use crate::script::ConversationScript;
use crate::sim::{Scenario, ScenarioConfig};

pub const PLAN_JSON: &str = include_str!("../../../scenarios/reference/plan.json");
pub const SCRIPT_JSON: &str = include_str!("../../../scenarios/reference/script.json");
pub const BASELINE_SCRIPT_JSON: &str = include_str!("../../../scenarios/reference/baseline_script.json");
pub const CORPUS_JSON: &str = include_str!("../../../scenarios/reference/corpus.json");
pub const SCENARIO_JSON: &str = include_str!("../../../scenarios/reference/scenario.json");

/// Directory holding the reference scenario files.
pub fn reference_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference")
}

pub fn reference_plan() -> AssemblyPlan {
    AssemblyPlan::from_json(PLAN_JSON).expect("reference plan parses")
}

pub fn reference_script() -> ConversationScript {
    serde_json::from_str(SCRIPT_JSON).expect("reference script parses")
}

pub fn baseline_script() -> ConversationScript {
    serde_json::from_str(BASELINE_SCRIPT_JSON).expect("baseline script parses")
}

pub fn reference_corpus() -> Corpus {
    Corpus::from_json(CORPUS_JSON).expect("reference corpus parses")
}

pub fn reference_config() -> ScenarioConfig {
    ScenarioConfig::from_json(SCENARIO_JSON).expect("reference scenario parses")
}

pub fn reference_scenario() -> Scenario {
    scenario_from(reference_config())
}

/// Builds a scenario from a config that uses the reference plan and scripts.
pub fn scenario_from(config: ScenarioConfig) -> Scenario {
    Scenario::from_parts(config, reference_plan(), reference_script(), baseline_script())
        .unwrap_or_else(|e| panic!("reference scenario is invalid: {e:?}"))
}
