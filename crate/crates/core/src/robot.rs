//! Simulated single-arm manipulator.
//!
//! The robot runs one action at a time. Whether and when an action fails is
//! decided once, when it starts, so results do not depend on how finely the
//! caller ticks the clock.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::time::{SimDuration, SimTime};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    FetchTool { item: String, label: String },
    DeliverComponent { item: String, label: String },
    Hold { item: String, label: String },
    AssistStep { step: String, label: String },
    Reset,
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActionKind::FetchTool { .. } => "fetch_tool",
            ActionKind::DeliverComponent { .. } => "deliver_component",
            ActionKind::Hold { .. } => "hold",
            ActionKind::AssistStep { .. } => "assist_step",
            ActionKind::Reset => "reset",
        }
    }

    /// The item or step the action is about.
    pub fn target(&self) -> Option<&str> {
        match self {
            ActionKind::FetchTool { item, .. } | ActionKind::DeliverComponent { item, .. } | ActionKind::Hold { item, .. } => {
                Some(item)
            }
            ActionKind::AssistStep { step, .. } => Some(step),
            ActionKind::Reset => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ActionKind::FetchTool { label, .. }
            | ActionKind::DeliverComponent { label, .. }
            | ActionKind::Hold { label, .. }
            | ActionKind::AssistStep { label, .. } => label,
            ActionKind::Reset => "reset",
        }
    }

    fn carried_item(&self) -> Option<&str> {
        match self {
            ActionKind::FetchTool { item, .. } | ActionKind::DeliverComponent { item, .. } | ActionKind::Hold { item, .. } => {
                Some(item)
            }
            _ => None,
        }
    }

    fn failure_reason(&self) -> FailureReason {
        match self {
            ActionKind::DeliverComponent { .. } => FailureReason::Dropped,
            ActionKind::FetchTool { .. } => FailureReason::GraspMiss,
            _ => FailureReason::Unreachable,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotAction {
    #[serde(flatten)]
    pub kind: ActionKind,
    pub duration: SimDuration,
}

impl RobotAction {
    pub fn new(kind: ActionKind, duration: SimDuration) -> Self {
        RobotAction { kind, duration }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Dropped,
    GraspMiss,
    Unreachable,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::Dropped => "dropped",
            FailureReason::GraspMiss => "grasp_miss",
            FailureReason::Unreachable => "unreachable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub action: RobotAction,
    pub reason: FailureReason,
}

impl Failure {
    /// First-person description, e.g. "I dropped the carrier".
    pub fn describe(&self) -> String {
        let label = self.action.kind.label();
        if let ActionKind::AssistStep { .. } = self.action.kind {
            return format!("I could not reach the work position to {label}");
        }
        match self.reason {
            FailureReason::Dropped => format!("I dropped the {label}"),
            FailureReason::GraspMiss => format!("I could not grasp the {label}"),
            FailureReason::Unreachable => format!("I could not reach the {label}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RobotMode {
    Idle,
    Executing { action: RobotAction, remaining: SimDuration },
    Blocked { reason: String },
    Faulted { failure: Failure },
}

impl RobotMode {
    pub fn name(&self) -> &'static str {
        match self {
            RobotMode::Idle => "idle",
            RobotMode::Executing { .. } => "executing",
            RobotMode::Blocked { .. } => "blocked",
            RobotMode::Faulted { .. } => "faulted",
        }
    }
}

/// Per-action-kind failure probabilities plus scheduled failure times.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureModel {
    /// Keyed by action kind name (`fetch_tool`, `deliver_component`, ...).
    #[serde(default)]
    pub probabilities: BTreeMap<String, f64>,
    /// Failure times in seconds, strictly increasing.
    #[serde(default)]
    pub schedule: Vec<f64>,
}

impl FailureModel {
    pub fn none() -> Self {
        FailureModel::default()
    }

    pub fn validate(&self) -> Result<(), String> {
        for (k, p) in &self.probabilities {
            if !(0.0..=1.0).contains(p) {
                return Err(format!("failure probability for {k} outside [0, 1]"));
            }
            if k == "reset" || !["fetch_tool", "deliver_component", "hold", "assist_step"].contains(&k.as_str()) {
                return Err(format!("unknown action kind {k:?} in failure probabilities"));
            }
        }
        if self.schedule.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err("failure schedule entries must be non-negative".into());
        }
        if self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err("failure schedule must be strictly increasing".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RobotError {
    #[error("robot is busy ({0})")]
    Busy(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RobotEvent {
    ActionDone { action: RobotAction, at: SimTime },
    ActionFailed { failure: Failure, at: SimTime },
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Running {
    end: SimTime,
    fail_at: Option<SimTime>,
}

#[derive(Clone, Debug)]
pub struct Robot {
    mode: RobotMode,
    gripper: Option<String>,
    now: SimTime,
    ordinal: u64,
    seed: u64,
    model: FailureModel,
    schedule: Vec<SimTime>,
    /// Scheduled failures whose time passed without a non-reset action.
    deferred: usize,
    running: Option<Running>,
}

impl Robot {
    pub fn new(seed: u64, model: FailureModel) -> Self {
        let schedule = model.schedule.iter().map(|&t| SimTime::from_secs(t)).collect();
        Robot {
            mode: RobotMode::Idle,
            gripper: None,
            now: SimTime::ZERO,
            ordinal: 0,
            seed,
            model,
            schedule,
            deferred: 0,
            running: None,
        }
    }

    pub fn mode(&self) -> &RobotMode {
        &self.mode
    }

    pub fn gripper(&self) -> Option<&str> {
        self.gripper.as_deref()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn is_executing(&self) -> bool {
        matches!(self.mode, RobotMode::Executing { .. })
    }

    pub fn current_action(&self) -> Option<&RobotAction> {
        match &self.mode {
            RobotMode::Executing { action, .. } => Some(action),
            _ => None,
        }
    }

    /// Number of actions started so far.
    pub fn actions_started(&self) -> u64 {
        self.ordinal
    }

    /// Time of the next completion or failure, if executing.
    pub fn next_event_time(&self) -> Option<SimTime> {
        self.running.as_ref().map(|r| r.fail_at.unwrap_or(r.end))
    }

    pub fn enqueue(&mut self, action: RobotAction) -> Result<(), RobotError> {
        match (&self.mode, &action.kind) {
            (RobotMode::Idle | RobotMode::Blocked { .. }, _) => {}
            (RobotMode::Faulted { .. }, ActionKind::Reset) => {}
            (RobotMode::Faulted { .. }, _) => return Err(RobotError::Busy("faulted")),
            (RobotMode::Executing { .. }, _) => return Err(RobotError::Busy("executing")),
        }
        let started = self.now;
        let end = started + action.duration;
        let fail_at = self.plan_failure(&action, started, end);
        self.ordinal += 1;
        if let Some(item) = action.kind.carried_item() {
            self.gripper = Some(item.to_owned());
        }
        self.running = Some(Running { end, fail_at });
        self.mode = RobotMode::Executing {
            remaining: action.duration,
            action,
        };
        Ok(())
    }

    fn plan_failure(&mut self, action: &RobotAction, start: SimTime, end: SimTime) -> Option<SimTime> {
        self.absorb_passed(start);
        if action.kind == ActionKind::Reset {
            return None;
        }
        let mut rng = rng::stream(self.seed, "robot", self.ordinal);
        let p = self.model.probabilities.get(action.kind.name()).copied().unwrap_or(0.0);
        let drawn = if p > 0.0 && rng.gen::<f64>() < p {
            let frac = rng.gen_range(0.25..=0.75);
            Some(start + action.duration.mul_f64(frac))
        } else {
            None
        };
        let scheduled = if self.deferred > 0 {
            self.deferred -= 1;
            self.schedule.remove(0);
            Some(start + action.duration.half())
        } else if self.schedule.first().is_some_and(|&t| t >= start && t < end) {
            Some(self.schedule.remove(0))
        } else {
            None
        };
        match (drawn, scheduled) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Counts schedule entries that went by before `t` without striking.
    fn absorb_passed(&mut self, t: SimTime) {
        self.deferred = self.schedule.iter().take_while(|&&s| s < t).count();
    }

    /// Puts an idle robot into a waiting state, or clears it with `None`.
    pub fn set_blocked(&mut self, reason: Option<String>) {
        match (&self.mode, reason) {
            (RobotMode::Idle | RobotMode::Blocked { .. }, Some(reason)) => self.mode = RobotMode::Blocked { reason },
            (RobotMode::Blocked { .. }, None) => self.mode = RobotMode::Idle,
            _ => {}
        }
    }

    /// Advances the robot clock by `dt`.
    pub fn tick(&mut self, dt: SimDuration) -> Vec<RobotEvent> {
        let target = self.now + dt;
        let mut events = Vec::new();
        if let Some(run) = self.running.clone() {
            let action = match &self.mode {
                RobotMode::Executing { action, .. } => action.clone(),
                _ => unreachable!("running implies executing"),
            };
            match run.fail_at {
                Some(at) if at <= target => {
                    let failure = Failure {
                        reason: action.kind.failure_reason(),
                        action,
                    };
                    self.running = None;
                    if failure.reason != FailureReason::Unreachable {
                        self.gripper = None;
                    }
                    self.mode = RobotMode::Faulted {
                        failure: failure.clone(),
                    };
                    events.push(RobotEvent::ActionFailed { failure, at });
                }
                _ if run.end <= target => {
                    self.running = None;
                    if action.kind == ActionKind::Reset || action.kind.carried_item().is_some() {
                        self.gripper = None;
                    }
                    self.mode = RobotMode::Idle;
                    events.push(RobotEvent::ActionDone {
                        action,
                        at: run.end,
                    });
                }
                _ => {
                    self.mode = RobotMode::Executing {
                        remaining: run.end.saturating_since(target),
                        action,
                    };
                }
            }
        }
        self.now = target;
        events
    }

    /// Advances to an absolute time; a no-op for times before `now`.
    pub fn advance_to(&mut self, t: SimTime) -> Vec<RobotEvent> {
        if t < self.now {
            return Vec::new();
        }
        self.tick(t.saturating_since(self.now))
    }

    pub fn status_text(&self) -> String {
        match &self.mode {
            RobotMode::Idle => match &self.gripper {
                None => "I am idle and ready to help.".to_owned(),
                Some(item) => format!("I am idle and holding the {}.", item.replace('_', " ")),
            },
            RobotMode::Executing { action, .. } => match &action.kind {
                ActionKind::FetchTool { label, .. } => format!("I am fetching the {label}."),
                ActionKind::DeliverComponent { label, .. } => format!("I am delivering the {label}."),
                ActionKind::Hold { label, .. } => format!("I am holding the {label}."),
                ActionKind::AssistStep { label, .. } => format!("I am working on: {label}."),
                ActionKind::Reset => "I am resetting.".to_owned(),
            },
            RobotMode::Blocked { reason } => format!("I am waiting: {reason}."),
            RobotMode::Faulted { failure } => format!("I had a problem: {}.", failure.describe()),
        }
    }
}

impl fmt::Display for RobotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
