use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::assembly::{Actor, AssemblyPlan, ItemKind, Location, ProgressState, StepStatus};
use crate::backend::{BackendEvent, Fulfiller, Mode, RequestEnvelope, ResponseEnvelope};
use crate::robot::{ActionKind, FailureReason, Robot, RobotAction, RobotEvent, RobotMode};
use crate::time::SimTime;

use super::config::{RobotTimings, Scenario};
use super::trace::{RecordBody, RobotEventKind, Trace};

pub(crate) const WAIT_FOR_NEXT: &str = "for the next command";
pub(crate) const WAIT_FOR_CONFIRM: &str = "for you to confirm the next step";
pub(crate) const WAIT_PAUSED: &str = "paused";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Task {
    Deliver(String),
    Hold(String),
    Step(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Human {
    Free,
    /// Reaction pending that will start this step.
    Committed(String),
    /// Waiting at a joint step for the robot.
    JoinWait(String),
    Working(String),
    Joint(String),
    /// Busy with a reaction that needs full attention.
    Occupied,
}

#[derive(Clone, Debug)]
pub(crate) struct Fault {
    pub task: Option<Task>,
    pub reason: FailureReason,
}

/// Everything the robot, operator and plan share. Acts as the back-end's
/// fulfiller so spoken requests change the world directly.
pub(crate) struct World {
    pub mode: Mode,
    pub comm: bool,
    pub plan: AssemblyPlan,
    pub order: Vec<String>,
    pub starts: BTreeMap<String, SimTime>,
    pub progress: ProgressState,
    pub robot: Robot,
    pub timings: RobotTimings,
    pub agenda: Vec<Task>,
    pub requests: VecDeque<Task>,
    pub current: Option<Task>,
    pub permit: bool,
    pub paused: bool,
    pub joint_go: BTreeSet<String>,
    pub joint_announced: BTreeSet<String>,
    pub human: Human,
    pub fault: Option<Fault>,
    pub last_speech: String,
    pub trace: Trace,
    pub now: SimTime,
    pub events: Vec<BackendEvent>,
    last_robot_state: (String, Option<String>),
}

impl World {
    pub fn new(scenario: &Scenario) -> Self {
        let cfg = &scenario.config;
        let plan = scenario.plan.clone();
        let mut progress = ProgressState::new(&plan);
        for item in &cfg.prestaged {
            progress.locations.insert(item.clone(), Location::SharedBench);
        }
        let order = plan.asap_order();
        let conversational = cfg.mode == Mode::Conversational && cfg.communication;
        let mut agenda = Vec::new();
        let mut planned: BTreeSet<&str> = BTreeSet::new();
        for id in &order {
            let step = plan.step(id).expect("ordered ids exist");
            let robot_work = step.actor.involves_robot();
            if robot_work || !conversational {
                for need in &step.needs {
                    if progress.location(need) != Location::SharedBench && planned.insert(need) {
                        agenda.push(Task::Deliver(need.clone()));
                    }
                }
            }
            if robot_work {
                agenda.push(Task::Step(id.clone()));
            }
        }
        let mut w = World {
            mode: cfg.mode,
            comm: cfg.communication,
            robot: Robot::new(cfg.seed, cfg.failures.clone()),
            timings: cfg.robot.clone(),
            agenda,
            requests: VecDeque::new(),
            current: None,
            permit: false,
            paused: false,
            joint_go: BTreeSet::new(),
            joint_announced: BTreeSet::new(),
            human: Human::Free,
            fault: None,
            last_speech: String::new(),
            trace: Trace::new(),
            now: SimTime::ZERO,
            events: Vec::new(),
            last_robot_state: ("idle".into(), None),
            starts: plan.asap_starts(),
            plan,
            order,
            progress,
        };
        for step in w.plan.steps.clone() {
            w.trace.push(
                SimTime::ZERO,
                RecordBody::Step {
                    step: step.id,
                    actor: step.actor,
                    status: StepStatus::Pending,
                },
            );
        }
        w.trace.push(
            SimTime::ZERO,
            RecordBody::Robot {
                event: RobotEventKind::Mode,
                mode: "idle".into(),
                action: None,
                detail: None,
            },
        );
        w
    }

    pub fn conversational(&self) -> bool {
        self.mode == Mode::Conversational && self.comm
    }

    pub fn needs_permit(&self) -> bool {
        self.mode == Mode::Baseline && self.comm
    }

    pub fn actor(&self, step: &str) -> Actor {
        self.plan.step(step).map_or(Actor::Human, |s| s.actor)
    }

    pub fn label(&self, item: &str) -> String {
        self.plan
            .item(item)
            .map_or_else(|| item.replace('_', " "), |i| i.label.clone())
    }

    pub fn set_status(&mut self, step: &str, status: StepStatus) {
        if self.progress.status(step) == Some(status) {
            return;
        }
        self.progress.steps.insert(step.to_owned(), status);
        let actor = self.actor(step);
        self.trace.push(
            self.now,
            RecordBody::Step {
                step: step.to_owned(),
                actor,
                status,
            },
        );
    }

    /// Promotes pending steps whose predecessors are done.
    pub fn update_readiness(&mut self) -> bool {
        let ready: Vec<String> = crate::assembly::ready_steps(&self.plan, &self.progress)
            .into_iter()
            .filter(|s| self.progress.status(s) == Some(StepStatus::Pending))
            .collect();
        for s in &ready {
            self.set_status(s, StepStatus::Ready);
        }
        !ready.is_empty()
    }

    pub fn items_ready(&self, step: &str) -> bool {
        self.plan
            .step(step)
            .is_some_and(|s| s.needs.iter().all(|i| self.progress.available(i)))
    }

    /// Earliest planned start of the work a task serves; sooner goes first.
    pub fn urgency(&self, task: &Task) -> SimTime {
        let start = |s: &str| self.starts.get(s).copied().unwrap_or(SimTime::ZERO);
        match task {
            Task::Hold(_) => SimTime::ZERO,
            Task::Step(s) => start(s),
            Task::Deliver(item) => self
                .plan
                .steps
                .iter()
                .filter(|s| s.needs.contains(item) && self.progress.status(&s.id) != Some(StepStatus::Done))
                .map(|s| start(&s.id))
                .min()
                .unwrap_or(SimTime::ZERO),
        }
    }

    /// Item is being delivered or is queued for delivery.
    pub fn in_transit(&self, item: &str) -> bool {
        let t = Task::Deliver(item.to_owned());
        self.current.as_ref() == Some(&t) || self.requests.contains(&t)
    }

    /// Records a robot mode change if the visible state differs.
    pub fn note_robot_mode(&mut self) -> bool {
        let (mode, detail) = match self.robot.mode() {
            RobotMode::Blocked { reason } => ("blocked".to_owned(), Some(reason.clone())),
            m => (m.name().to_owned(), None),
        };
        if (mode.clone(), detail.clone()) == self.last_robot_state {
            return false;
        }
        self.last_robot_state = (mode.clone(), detail.clone());
        self.trace.push(
            self.now,
            RecordBody::Robot {
                event: RobotEventKind::Mode,
                mode,
                action: None,
                detail,
            },
        );
        true
    }

    pub fn set_robot_wait(&mut self, reason: Option<&str>) -> bool {
        self.robot.set_blocked(reason.map(str::to_owned));
        self.note_robot_mode()
    }

    fn action_for(&self, task: &Task) -> RobotAction {
        match task {
            Task::Deliver(item) => {
                let label = self.label(item);
                let kind = self.plan.item(item).map_or(ItemKind::Component, |i| i.kind);
                let action = match kind {
                    ItemKind::Tool => ActionKind::FetchTool {
                        item: item.clone(),
                        label,
                    },
                    ItemKind::Component => ActionKind::DeliverComponent {
                        item: item.clone(),
                        label,
                    },
                };
                RobotAction::new(action, self.timings.handover(kind))
            }
            Task::Hold(item) => RobotAction::new(
                ActionKind::Hold {
                    item: item.clone(),
                    label: self.label(item),
                },
                self.timings.hold(),
            ),
            Task::Step(step) => {
                let s = self.plan.step(step).expect("agenda steps exist");
                RobotAction::new(
                    ActionKind::AssistStep {
                        step: step.clone(),
                        label: s.description.clone(),
                    },
                    s.nominal(),
                )
            }
        }
    }

    fn start(&mut self, action: RobotAction) {
        let name = action.kind.name().to_owned();
        let detail = action.kind.target().map(str::to_owned);
        self.robot.enqueue(action).expect("robot accepts work when free");
        self.last_robot_state = ("executing".into(), None);
        self.trace.push(
            self.now,
            RecordBody::Robot {
                event: RobotEventKind::Started,
                mode: "executing".into(),
                action: Some(name),
                detail,
            },
        );
    }

    pub fn start_task(&mut self, task: Task) {
        let action = self.action_for(&task);
        if let Task::Step(step) = &task {
            self.set_status(step, StepStatus::Active);
            if self.actor(step) == Actor::Joint {
                self.human = Human::Joint(step.clone());
            }
        }
        self.current = Some(task);
        self.start(action);
    }

    pub fn start_reset(&mut self) -> bool {
        if !matches!(self.robot.mode(), RobotMode::Faulted { .. }) {
            return false;
        }
        let action = RobotAction::new(ActionKind::Reset, self.timings.reset());
        self.start(action);
        true
    }

    fn forget(&mut self, task: &Task) {
        self.agenda.retain(|t| t != task);
        self.requests.retain(|t| t != task);
    }

    pub fn on_robot_event(&mut self, ev: RobotEvent) {
        match ev {
            RobotEvent::ActionDone { action, .. } => {
                self.last_robot_state = ("idle".into(), None);
                self.trace.push(
                    self.now,
                    RecordBody::Robot {
                        event: RobotEventKind::Done,
                        mode: "idle".into(),
                        action: Some(action.kind.name().to_owned()),
                        detail: action.kind.target().map(str::to_owned),
                    },
                );
                if action.kind == ActionKind::Reset {
                    if let Some(Fault {
                        task: Some(Task::Step(step)),
                        ..
                    }) = self.fault.take()
                    {
                        if self.progress.status(&step) == Some(StepStatus::Failed) {
                            self.set_status(&step, StepStatus::Ready);
                        }
                    }
                    return;
                }
                let Some(task) = self.current.take() else { return };
                self.forget(&task);
                match &task {
                    Task::Deliver(item) => {
                        self.progress.locations.insert(item.clone(), Location::SharedBench);
                        if self.conversational() {
                            let label = self.label(item);
                            self.events.push(
                                BackendEvent::new("item_delivered")
                                    .with("item", item.clone())
                                    .with("item_label", label),
                            );
                        }
                    }
                    Task::Hold(_) => {}
                    Task::Step(step) => {
                        self.set_status(step, StepStatus::Done);
                        self.joint_go.remove(step);
                        if self.human == Human::Joint(step.clone()) {
                            self.human = Human::Free;
                        }
                    }
                }
            }
            RobotEvent::ActionFailed { failure, .. } => {
                let detail = failure.describe();
                self.last_robot_state = ("faulted".into(), None);
                self.trace.push(
                    self.now,
                    RecordBody::Robot {
                        event: RobotEventKind::Failed,
                        mode: "faulted".into(),
                        action: Some(failure.action.kind.name().to_owned()),
                        detail: Some(detail.clone()),
                    },
                );
                let task = self.current.take();
                if let Some(Task::Step(step)) = &task {
                    self.set_status(step, StepStatus::Failed);
                    if self.human == Human::Joint(step.clone()) {
                        self.human = Human::Free;
                    }
                }
                if self.conversational() {
                    let mut ev = BackendEvent::new("action_failed")
                        .with("reason", failure.reason.as_str())
                        .with("action", failure.action.kind.name())
                        .with("detail", detail)
                        .with("item_label", failure.action.kind.label().to_owned());
                    if let Some(target) = failure.action.kind.target() {
                        ev = ev.with("item", target.to_owned());
                    }
                    self.events.push(ev);
                }
                self.fault = Some(Fault {
                    task,
                    reason: failure.reason,
                });
            }
        }
    }

    /// Human steps not yet started, in plan order.
    pub fn upcoming_human_steps(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str).filter(|s| {
            self.actor(s) == Actor::Human
                && matches!(self.progress.status(s), Some(StepStatus::Pending | StepStatus::Ready))
                && self.human != Human::Committed(s.to_string())
        })
    }

    fn faulted(&self) -> bool {
        matches!(self.robot.mode(), RobotMode::Faulted { .. })
    }

    fn robot_free(&self) -> bool {
        matches!(self.robot.mode(), RobotMode::Idle | RobotMode::Blocked { .. })
    }

    fn request_item(&mut self, slot: Option<&String>, hold: bool) -> String {
        let Some(item) = slot.cloned() else {
            return "Which item do you mean?".into();
        };
        let label = self.label(&item);
        if self.plan.item(&item).is_none() {
            return format!("I do not have the {label}.");
        }
        let free_now = self.robot_free() && !self.paused && self.requests.is_empty();
        if hold {
            self.requests.push_back(Task::Hold(item));
            return if free_now {
                format!("Holding the {label} now.")
            } else {
                format!("I will hold the {label} when I am free.")
            };
        }
        if self.progress.available(&item) {
            return format!("The {label} is already on the bench.");
        }
        if self.in_transit(&item) {
            return format!("I am already bringing the {label}.");
        }
        self.requests.push_back(Task::Deliver(item));
        if free_now {
            format!("Bringing the {label} now.")
        } else {
            format!("I will bring the {label} when I am free.")
        }
    }

    /// Resolves an affirmative answer against the question it replies to.
    fn affirm(&mut self, about: Option<&str>) -> String {
        let about = about.map(str::to_owned).or_else(|| {
            if self.faulted() {
                Some(match self.fault.as_ref().map(|f| f.reason) {
                    Some(FailureReason::Dropped) => "assist_recovery".to_owned(),
                    _ => "report_problem".to_owned(),
                })
            } else if self.joint_announced.iter().any(|s| !self.joint_go.contains(s)) {
                Some("confirm_next_step".to_owned())
            } else {
                None
            }
        });
        match about.as_deref() {
            Some("assist_recovery") => {
                if let Some(Fault {
                    task: Some(Task::Deliver(item)),
                    ..
                }) = &self.fault
                {
                    let item = item.clone();
                    self.progress.locations.insert(item.clone(), Location::SharedBench);
                    self.forget(&Task::Deliver(item));
                }
                if self.start_reset() {
                    "Thank you. I will reset and continue.".into()
                } else {
                    "Thank you.".into()
                }
            }
            Some("report_problem") => {
                if self.start_reset() {
                    "Okay, I will reset and try again.".into()
                } else {
                    "Okay.".into()
                }
            }
            Some("confirm_next_step") => {
                let waiting: Vec<String> = self
                    .joint_announced
                    .iter()
                    .filter(|s| !self.joint_go.contains(*s))
                    .cloned()
                    .collect();
                if waiting.is_empty() {
                    return "Okay.".into();
                }
                self.joint_go.extend(waiting);
                "Great, let us start.".into()
            }
            _ => "Okay.".into(),
        }
    }

    fn next_for_human(&self) -> String {
        if self.progress.all_done() {
            return "Everything is done.".into();
        }
        let next = self
            .order
            .iter()
            .find(|s| self.actor(s) != Actor::Robot && self.progress.status(s) == Some(StepStatus::Ready));
        match next.and_then(|s| self.plan.step(s)) {
            Some(step) => format!("Next for you: {}.", step.description),
            None => "Nothing is ready for you yet.".into(),
        }
    }

    fn conversational_reply(&mut self, req: &RequestEnvelope) -> String {
        let about = req.reply_to.as_ref().map(|r| r.dialogue.as_str());
        match req.intent.as_deref() {
            Some("request_tool") => self.request_item(req.slots.get("tool"), false),
            Some("request_component") => self.request_item(req.slots.get("component"), false),
            Some("request_hold") => self.request_item(req.slots.get("component"), true),
            Some("status_query") => self.robot.status_text(),
            Some("next_step_info") => self.next_for_human(),
            Some("affirm") => self.affirm(about),
            Some("deny") => "Okay, tell me when you are ready.".into(),
            Some("retry_action") => {
                if self.start_reset() {
                    "Resetting and trying again.".into()
                } else {
                    "There is nothing to retry.".into()
                }
            }
            Some("pause") => {
                self.paused = true;
                if self.robot.is_executing() {
                    "Pausing after this action.".into()
                } else {
                    "Pausing.".into()
                }
            }
            Some("resume") => {
                self.paused = false;
                "Resuming.".into()
            }
            _ => "Okay.".into(),
        }
    }

    fn baseline_reply(&mut self, req: &RequestEnvelope) -> String {
        match req.intent.as_deref() {
            Some("next") => {
                self.paused = false;
                if self.faulted() {
                    "Error. Reset required.".into()
                } else {
                    self.permit = true;
                    "Next.".into()
                }
            }
            Some("stop") => {
                self.paused = true;
                "Stopped.".into()
            }
            Some("reset") => {
                if self.start_reset() {
                    "Resetting.".into()
                } else {
                    "Nothing to reset.".into()
                }
            }
            Some("repeat") => {
                if self.last_speech.is_empty() {
                    "Nothing to repeat.".into()
                } else {
                    self.last_speech.clone()
                }
            }
            _ => "Unknown command.".into(),
        }
    }

    /// Compact state string hashed into responses.
    pub fn describe_state(&self) -> String {
        let steps: BTreeMap<&String, &StepStatus> = self.progress.steps.iter().collect();
        format!(
            "t={};robot={};gripper={:?};steps={:?};locations={:?};paused={}",
            self.now.as_millis(),
            self.robot.mode().name(),
            self.robot.gripper(),
            steps,
            self.progress.locations,
            self.paused
        )
    }
}

impl Fulfiller for World {
    fn fulfil(&mut self, request: &RequestEnvelope) -> ResponseEnvelope {
        let speech = match self.mode {
            Mode::Conversational => self.conversational_reply(request),
            Mode::Baseline => self.baseline_reply(request),
        };
        if request.intent.as_deref() != Some("repeat") {
            self.last_speech = speech.clone();
        }
        ResponseEnvelope::say(&request.session, speech)
    }

    fn state_digest(&self) -> String {
        self.describe_state()
    }
}
