use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{validate_plan, AssemblyPlan, ItemKind, PlanError};
use crate::backend::Mode;
use crate::rng::Latency;
use crate::robot::FailureModel;
use crate::script::{CompiledScript, ConversationScript, LoadError, ScriptError};
use crate::time::{SimDuration, SimTime};

pub const SCENARIO_VERSION: u32 = 1;

/// Robot action durations in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotTimings {
    pub fetch: f64,
    pub deliver: f64,
    pub hold: f64,
    pub reset: f64,
}

impl RobotTimings {
    pub fn fetch(&self) -> SimDuration {
        SimDuration::from_secs(self.fetch)
    }
    pub fn deliver(&self) -> SimDuration {
        SimDuration::from_secs(self.deliver)
    }
    pub fn hold(&self) -> SimDuration {
        SimDuration::from_secs(self.hold)
    }
    pub fn reset(&self) -> SimDuration {
        SimDuration::from_secs(self.reset)
    }

    /// Handover duration for an item of the given kind.
    pub fn handover(&self, kind: ItemKind) -> SimDuration {
        match kind {
            ItemKind::Tool => self.fetch(),
            ItemKind::Component => self.deliver(),
        }
    }
}

/// How the scripted operator reacts to one kind of observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub latency: Latency,
    /// Utterance template; `{item}` and `{value}` are substituted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub say: Option<String>,
    /// React only while not working, and stay occupied until done.
    #[serde(default)]
    pub when_free: bool,
}

impl Policy {
    pub fn immediate() -> Self {
        Policy {
            latency: Latency::zero(),
            say: None,
            when_free: false,
        }
    }
}

fn lookup(policies: &BTreeMap<String, Policy>, key: &str) -> Policy {
    if let Some(p) = policies.get(key) {
        return p.clone();
    }
    if let Some((class, _)) = key.split_once(':') {
        if let Some(p) = policies.get(&format!("{class}:*")) {
            return p.clone();
        }
    }
    Policy::immediate()
}

fn validate_policies(policies: &BTreeMap<String, Policy>, errs: &mut Vec<ScenarioError>, label: &str) {
    for (k, p) in policies {
        if let Err(e) = p.latency.validate() {
            errs.push(ScenarioError::Invalid(format!("{label} policy {k}: {e}")));
        }
    }
}

/// Physical behavior of the operator, shared by both modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalProfile {
    /// Multiplier applied to nominal human step durations.
    #[serde(default = "one")]
    pub work_speed: f64,
    /// Per-step overrides of `work_speed`.
    #[serde(default)]
    pub step_speed: BTreeMap<String, f64>,
    /// Keyed by `step_ready`, `joint_ready` (joining a joint step without
    /// speech) or `robot_faulted` (resetting the robot by hand without speech).
    #[serde(default)]
    pub policies: BTreeMap<String, Policy>,
}

impl Default for PhysicalProfile {
    fn default() -> Self {
        PhysicalProfile {
            work_speed: 1.0,
            step_speed: BTreeMap::new(),
            policies: BTreeMap::new(),
        }
    }
}

impl PhysicalProfile {
    pub fn policy(&self, key: &str) -> Policy {
        lookup(&self.policies, key)
    }

    pub fn speed_for(&self, step: &str) -> f64 {
        self.step_speed.get(step).copied().unwrap_or(self.work_speed)
    }

    fn validate(&self, errs: &mut Vec<ScenarioError>) {
        let speeds = std::iter::once(self.work_speed).chain(self.step_speed.values().copied());
        for s in speeds {
            if !(s.is_finite() && s > 0.0) {
                errs.push(ScenarioError::Invalid("operator work speed must be positive".into()));
            }
        }
        validate_policies(&self.policies, errs, "physical");
    }
}

/// What the operator says, and when, in one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeechProfile {
    /// How many upcoming human steps the operator requests items for.
    #[serde(default = "default_lookahead")]
    pub lookahead: usize,
    /// Keyed by `item_needed`, `robot_waiting`, `robot_faulted`,
    /// `slot:<name>` or `prompt:<dialogue>`; `slot:*` and `prompt:*` match any.
    #[serde(default)]
    pub policies: BTreeMap<String, Policy>,
    /// Per-item wording for item requests, e.g. `{"sun_gear": "bring the gear"}`.
    #[serde(default)]
    pub phrasing: BTreeMap<String, String>,
}

fn one() -> f64 {
    1.0
}

fn default_lookahead() -> usize {
    2
}

impl Default for SpeechProfile {
    fn default() -> Self {
        SpeechProfile {
            lookahead: default_lookahead(),
            policies: BTreeMap::new(),
            phrasing: BTreeMap::new(),
        }
    }
}

impl SpeechProfile {
    /// Policy for `key`, falling back to a class wildcard and then to an
    /// immediate reaction.
    pub fn policy(&self, key: &str) -> Policy {
        lookup(&self.policies, key)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorProfiles {
    #[serde(default)]
    pub physical: PhysicalProfile,
    #[serde(default)]
    pub conversational: SpeechProfile,
    #[serde(default)]
    pub baseline: SpeechProfile,
}

impl OperatorProfiles {
    pub fn speech(&self, mode: Mode) -> &SpeechProfile {
        match mode {
            Mode::Conversational => &self.conversational,
            Mode::Baseline => &self.baseline,
        }
    }

    fn validate(&self, errs: &mut Vec<ScenarioError>) {
        self.physical.validate(errs);
        validate_policies(&self.conversational.policies, errs, "conversational");
        validate_policies(&self.baseline.policies, errs, "baseline");
    }
}

/// Scenario document; asset paths are relative to the document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub id: String,
    pub mode: Mode,
    pub seed: u64,
    pub plan: PathBuf,
    pub script: PathBuf,
    pub baseline_script: PathBuf,
    /// Disables every spoken exchange and robot-initiated dialogue.
    #[serde(default = "yes")]
    pub communication: bool,
    /// Items already on the shared bench at start.
    #[serde(default)]
    pub prestaged: Vec<String>,
    pub robot: RobotTimings,
    #[serde(default)]
    pub failures: FailureModel,
    #[serde(default)]
    pub operator: OperatorProfiles,
    /// Seconds.
    pub max_time: f64,
}

fn yes() -> bool {
    true
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn max_time(&self) -> SimTime {
        SimTime::from_secs(self.max_time)
    }

    pub fn validate(&self) -> Result<(), Vec<ScenarioError>> {
        let mut errs = Vec::new();
        if self.version != SCENARIO_VERSION {
            errs.push(ScenarioError::Invalid(format!("unsupported scenario version {}", self.version)));
        }
        if !(self.max_time.is_finite() && self.max_time > 0.0) {
            errs.push(ScenarioError::Invalid("max_time must be positive".into()));
        }
        let r = &self.robot;
        for (name, v) in [("fetch", r.fetch), ("deliver", r.deliver), ("hold", r.hold), ("reset", r.reset)] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(ScenarioError::Invalid(format!("robot {name} duration must be positive")));
            }
        }
        if let Err(e) = self.failures.validate() {
            errs.push(ScenarioError::Invalid(e));
        }
        self.operator.validate(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("plan: {0}")]
    Plan(PlanError),
    #[error("script: {0}")]
    Script(ScriptError),
    #[error("baseline script must not contain {0}")]
    BaselineScript(String),
}

impl PartialEq for ScenarioError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

/// A validated scenario with its assets loaded.
#[derive(Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plan: AssemblyPlan,
    pub script: Arc<CompiledScript>,
    pub baseline_script: Arc<CompiledScript>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario").field("config", &self.config).finish_non_exhaustive()
    }
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, LoadError> {
    serde_json::from_str(text).map_err(|source| LoadError::Parse {
        path: path.display().to_string(),
        source,
    })
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, Vec<ScenarioError>> {
        let one = |e: LoadError| vec![ScenarioError::Load(e)];
        let config: ScenarioConfig = parse(path, &read(path).map_err(one)?).map_err(one)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let plan_path = dir.join(&config.plan);
        let script_path = dir.join(&config.script);
        let baseline_path = dir.join(&config.baseline_script);
        let plan = parse(&plan_path, &read(&plan_path).map_err(one)?).map_err(one)?;
        let script = parse(&script_path, &read(&script_path).map_err(one)?).map_err(one)?;
        let baseline = parse(&baseline_path, &read(&baseline_path).map_err(one)?).map_err(one)?;
        Self::from_parts(config, plan, script, baseline)
    }

    pub fn from_parts(
        config: ScenarioConfig,
        plan: AssemblyPlan,
        script: ConversationScript,
        baseline_script: ConversationScript,
    ) -> Result<Self, Vec<ScenarioError>> {
        let mut errs = Vec::new();
        if let Err(e) = config.validate() {
            errs.extend(e);
        }
        if let Err(e) = validate_plan(&plan) {
            errs.extend(e.into_iter().map(ScenarioError::Plan));
        }
        for item in &config.prestaged {
            if plan.item(item).is_none() {
                errs.push(ScenarioError::Invalid(format!("prestaged item {item:?} is not in the plan")));
            }
        }
        if baseline_script.has_api_dialogues() {
            errs.push(ScenarioError::BaselineScript("robot-initiated dialogues".into()));
        }
        if baseline_script.intents.iter().any(|i| i.required_slots().next().is_some()) {
            errs.push(ScenarioError::BaselineScript("slot prompts".into()));
        }
        let script = CompiledScript::compile(script);
        let baseline = CompiledScript::compile(baseline_script);
        let (script, baseline_script) = match (script, baseline) {
            (Ok(a), Ok(b)) => (a, b),
            (a, b) => {
                errs.extend(a.err().into_iter().flatten().map(ScenarioError::Script));
                errs.extend(b.err().into_iter().flatten().map(ScenarioError::Script));
                return Err(errs);
            }
        };
        if errs.is_empty() {
            Ok(Scenario {
                config,
                plan,
                script,
                baseline_script,
            })
        } else {
            Err(errs)
        }
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    /// Same scenario in another mode.
    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut s = self.clone();
        s.config.mode = mode;
        s
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.config.seed = seed;
        s
    }

    /// Script that serves the configured mode.
    pub fn active_script(&self) -> &Arc<CompiledScript> {
        match self.config.mode {
            Mode::Conversational => &self.script,
            Mode::Baseline => &self.baseline_script,
        }
    }

    pub fn speech(&self) -> &SpeechProfile {
        self.config.operator.speech(self.config.mode)
    }
}
