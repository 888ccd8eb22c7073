//! Assembly plans: steps with actors and item needs, a precedence DAG, and
//! the progress bookkeeping the simulator mutates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::script::LoadError;
use crate::time::{SimDuration, SimTime};

pub const PLAN_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Human,
    Robot,
    Joint,
}

impl Actor {
    /// Whether the robot takes part in the step.
    pub fn involves_robot(self) -> bool {
        matches!(self, Actor::Robot | Actor::Joint)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Tool,
    Component,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    #[default]
    Storage,
    SharedBench,
    HumanHand,
    RobotGripper,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: String,
    pub kind: ItemKind,
    /// Spoken name, e.g. "planet carrier".
    pub label: String,
    #[serde(default)]
    pub location: Location,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub id: String,
    pub actor: Actor,
    #[serde(default)]
    pub needs: Vec<String>,
    /// Nominal duration in seconds.
    pub duration: f64,
    #[serde(default)]
    pub description: String,
}

impl Step {
    pub fn nominal(&self) -> SimDuration {
        SimDuration::from_secs(self.duration)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyPlan {
    pub version: u32,
    pub id: String,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub precedence: Vec<(String, String)>,
    #[serde(default)]
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("unsupported plan version {0}")]
    UnsupportedVersion(u32),
    #[error("precedence graph is cyclic through {0:?}")]
    CyclicPrecedence(Vec<String>),
    #[error("step {step:?} needs undeclared item {item:?}")]
    UnknownItem { step: String, item: String },
    #[error("step {0:?} has a non-positive duration")]
    NonpositiveDuration(String),
    #[error("duplicate step id {0:?}")]
    DuplicateStep(String),
    #[error("precedence references unknown step {0:?}")]
    UnknownStep(String),
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
}

impl AssemblyPlan {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| LoadError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn predecessors(&self, id: &str) -> impl Iterator<Item = &str> {
        let id = id.to_owned();
        self.precedence
            .iter()
            .filter(move |(_, b)| *b == id)
            .map(|(a, _)| a.as_str())
    }

    /// Steps in a topological order, ties broken by declaration order.
    /// Returns the ids left over when the graph has a cycle.
    pub fn topological_order(&self) -> Result<Vec<String>, Vec<String>> {
        let ids: Vec<&str> = self.steps.iter().map(|s| s.id.as_str()).collect();
        let mut indeg: BTreeMap<&str, usize> = ids.iter().map(|&i| (i, 0)).collect();
        for (a, b) in &self.precedence {
            if indeg.contains_key(a.as_str()) {
                if let Some(d) = indeg.get_mut(b.as_str()) {
                    *d += 1;
                }
            }
        }
        let mut queue: VecDeque<&str> = ids.iter().copied().filter(|i| indeg[i] == 0).collect();
        let mut order = Vec::new();
        while let Some(n) = queue.pop_front() {
            order.push(n.to_owned());
            for succ in ids.iter().copied() {
                let edges = self
                    .precedence
                    .iter()
                    .filter(|(a, b)| a == n && b == succ)
                    .count();
                if edges > 0 {
                    let d = indeg.get_mut(succ).unwrap();
                    *d -= edges;
                    if *d == 0 {
                        queue.push_back(succ);
                    }
                }
            }
        }
        if order.len() == ids.len() {
            Ok(order)
        } else {
            let done: BTreeSet<&str> = order.iter().map(String::as_str).collect();
            Err(ids.iter().filter(|i| !done.contains(*i)).map(|i| i.to_string()).collect())
        }
    }

    /// Earliest start of every step with unlimited actors and nominal durations.
    pub fn asap_starts(&self) -> BTreeMap<String, SimTime> {
        let order = self.topological_order().unwrap_or_default();
        let mut start: BTreeMap<String, SimTime> = BTreeMap::new();
        for id in &order {
            let s = self
                .predecessors(id)
                .filter_map(|p| Some(*start.get(p)? + self.step(p)?.nominal()))
                .max()
                .unwrap_or(SimTime::ZERO);
            start.insert(id.clone(), s);
        }
        start
    }

    /// Steps sorted by earliest start, then declaration order.
    pub fn asap_order(&self) -> Vec<String> {
        let starts = self.asap_starts();
        let mut ids: Vec<(SimTime, usize, String)> = self
            .steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| Some((*starts.get(&s.id)?, i, s.id.clone())))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, _, id)| id).collect()
    }

    /// Length of the longest nominal-duration path.
    pub fn critical_path(&self) -> SimDuration {
        let starts = self.asap_starts();
        self.steps
            .iter()
            .filter_map(|s| Some(starts.get(&s.id)?.saturating_since(SimTime::ZERO) + s.nominal()))
            .max()
            .unwrap_or_default()
    }
}

/// Checks the plan, collecting every violation.
pub fn validate_plan(plan: &AssemblyPlan) -> Result<(), Vec<PlanError>> {
    let mut errs = Vec::new();
    if plan.version != PLAN_VERSION {
        errs.push(PlanError::UnsupportedVersion(plan.version));
    }
    let mut items = BTreeSet::new();
    for item in &plan.items {
        if !items.insert(item.id.as_str()) {
            errs.push(PlanError::DuplicateItem(item.id.clone()));
        }
    }
    let mut steps = BTreeSet::new();
    for step in &plan.steps {
        if !steps.insert(step.id.as_str()) {
            errs.push(PlanError::DuplicateStep(step.id.clone()));
        }
        if !(step.duration.is_finite() && step.duration > 0.0) || step.nominal().is_zero() {
            errs.push(PlanError::NonpositiveDuration(step.id.clone()));
        }
        for need in &step.needs {
            if !items.contains(need.as_str()) {
                errs.push(PlanError::UnknownItem {
                    step: step.id.clone(),
                    item: need.clone(),
                });
            }
        }
    }
    let mut unknown = BTreeSet::new();
    for (a, b) in &plan.precedence {
        for s in [a, b] {
            if !steps.contains(s.as_str()) && unknown.insert(s.clone()) {
                errs.push(PlanError::UnknownStep(s.clone()));
            }
        }
    }
    if let Err(cycle) = plan.topological_order() {
        errs.push(PlanError::CyclicPrecedence(cycle));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Pending,
    Ready,
    Active,
    Done,
    Failed,
}

/// Mutable progress over one plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressState {
    pub steps: BTreeMap<String, StepStatus>,
    pub locations: BTreeMap<String, Location>,
}

impl ProgressState {
    pub fn new(plan: &AssemblyPlan) -> Self {
        ProgressState {
            steps: plan.steps.iter().map(|s| (s.id.clone(), StepStatus::Pending)).collect(),
            locations: plan.items.iter().map(|i| (i.id.clone(), i.location)).collect(),
        }
    }

    pub fn status(&self, step: &str) -> Option<StepStatus> {
        self.steps.get(step).copied()
    }

    pub fn all_done(&self) -> bool {
        self.steps.values().all(|s| *s == StepStatus::Done)
    }

    pub fn location(&self, item: &str) -> Location {
        self.locations.get(item).copied().unwrap_or_default()
    }

    pub fn available(&self, item: &str) -> bool {
        self.location(item) == Location::SharedBench
    }
}

/// Pending or ready steps whose predecessors are all done.
pub fn ready_steps(plan: &AssemblyPlan, progress: &ProgressState) -> BTreeSet<String> {
    plan.steps
        .iter()
        .filter(|s| matches!(progress.status(&s.id), Some(StepStatus::Pending | StepStatus::Ready)))
        .filter(|s| plan.predecessors(&s.id).all(|p| progress.status(p) == Some(StepStatus::Done)))
        .map(|s| s.id.clone())
        .collect()
}
