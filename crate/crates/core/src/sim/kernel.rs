use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::assembly::{Actor, Location, StepStatus};
use crate::backend::{
    Backend, BackendError, BackendEvent, Exchange, Invocation, Mode, RequestEnvelope, RequestKind, EVENT_SESSION,
};
use crate::dialogue::{AwaitingInput, SessionStatus, Speaker, TurnOutcome};
use crate::metrics::{compute_metrics, MetricsError, MetricsReport};
use crate::rng;
use crate::robot::RobotMode;
use crate::time::{SimDuration, SimTime};

use super::config::{PhysicalProfile, Scenario, SpeechProfile};
use super::trace::{EndReason, RecordBody, Trace, TraceRecord};
use super::world::{Human, Task, World, WAIT_FOR_CONFIRM, WAIT_FOR_NEXT, WAIT_PAUSED};

const WAIT_FOR_OPERATOR: &str = "for the operator";
const SETTLE_LIMIT: usize = 10_000;
/// How often the scripted operator asks for the same item before giving up.
const MAX_ASKS: u32 = 3;

/// Who speaks for the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Policies from the scenario drive both speech and physical work.
    Scripted,
    /// Speech comes from outside through [`Sim::say`]; physical work stays scripted.
    External,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Event {
    StartStep(String),
    HumanDone(String),
    JoinJoint(String),
    PhysicalReset,
    Say(Speech),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Speech {
    text: String,
    /// Item this utterance asks for.
    item: Option<String>,
    /// Answers a slot prompt; everything else waits until no prompt is open.
    answer: bool,
}

impl Speech {
    fn plain(text: String) -> Self {
        Speech {
            text,
            item: None,
            answer: false,
        }
    }
}

impl Event {
    /// Speech is heard after physical events that happen at the same instant.
    fn class(&self) -> u8 {
        match self {
            Event::Say(_) => 1,
            _ => 0,
        }
    }
}

/// Serializable view of the simulation at the current instant.
#[derive(Clone, Debug, Serialize)]
pub struct SimSnapshot {
    pub t: SimTime,
    pub mode: Mode,
    pub robot: RobotMode,
    pub robot_status: String,
    pub operator: String,
    pub steps: BTreeMap<String, StepStatus>,
    pub locations: BTreeMap<String, Location>,
    pub session: Option<SessionStatus>,
    pub trace_len: usize,
    pub finished: Option<EndReason>,
}

/// Discrete-event simulation of one scenario.
pub struct Sim {
    world: World,
    backend: Backend,
    physical: PhysicalProfile,
    profile: SpeechProfile,
    operator: OperatorKind,
    seed: u64,
    max_time: SimTime,
    heap: BTreeMap<(SimTime, u8, u64), (Option<String>, Event)>,
    next_seq: u64,
    armed: BTreeSet<String>,
    draws: BTreeMap<String, u64>,
    voice_free: SimTime,
    /// Items the operator asked for by voice, newest last.
    asked: Vec<String>,
    /// Items with an unresolved request, and how often each was asked.
    open_asks: BTreeSet<String>,
    ask_count: BTreeMap<String, u32>,
    /// Speech held back while a slot prompt is open.
    held: std::collections::VecDeque<Speech>,
    finished: Option<EndReason>,
}

impl Sim {
    pub fn new(scenario: &Scenario, operator: OperatorKind) -> Self {
        let mode = scenario.mode();
        let mut sim = Sim {
            world: World::new(scenario),
            backend: Backend::new(scenario.active_script().clone(), mode),
            physical: scenario.config.operator.physical.clone(),
            profile: scenario.speech().clone(),
            operator,
            seed: scenario.config.seed,
            max_time: scenario.config.max_time(),
            heap: BTreeMap::new(),
            next_seq: 0,
            armed: BTreeSet::new(),
            draws: BTreeMap::new(),
            voice_free: SimTime::ZERO,
            asked: Vec::new(),
            open_asks: BTreeSet::new(),
            ask_count: BTreeMap::new(),
            held: Default::default(),
            finished: None,
        };
        sim.settle();
        sim.check_done();
        sim
    }

    pub fn mode(&self) -> Mode {
        self.world.mode
    }

    pub fn now(&self) -> SimTime {
        self.world.now
    }

    pub fn max_time(&self) -> SimTime {
        self.max_time
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.finished
    }

    pub fn is_finished(&self) -> bool {
        self.finished.is_some()
    }

    pub fn trace(&self) -> &Trace {
        &self.world.trace
    }

    pub fn into_trace(self) -> Trace {
        self.world.trace
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    /// Runs to completion or timeout.
    pub fn run(mut self) -> Trace {
        while self.step() {}
        self.world.trace
    }

    /// Processes the next instant. Returns false once the run has ended.
    pub fn step(&mut self) -> bool {
        if self.finished.is_some() {
            return false;
        }
        self.settle();
        if self.check_done() {
            return false;
        }
        match self.next_time() {
            Some(t) if t <= self.max_time => {
                self.process_instant(t);
                true
            }
            _ if self.operator == OperatorKind::External => {
                self.process_instant(self.max_time);
                self.finish(EndReason::Timeout);
                false
            }
            _ => {
                self.process_instant(self.max_time);
                if !self.check_done() {
                    self.finish(EndReason::Timeout);
                }
                false
            }
        }
    }

    /// Processes everything up to and including `t`, then moves the clock to `t`.
    pub fn advance_to(&mut self, t: SimTime) {
        let t = t.min(self.max_time);
        while self.finished.is_none() {
            self.settle();
            if self.check_done() {
                return;
            }
            match self.next_time() {
                Some(n) if n <= t => self.process_instant(n),
                _ => break,
            }
        }
        if self.finished.is_some() {
            return;
        }
        if t > self.world.now {
            self.process_instant(t);
        }
        if !self.check_done() && self.world.now >= self.max_time {
            self.finish(EndReason::Timeout);
        }
    }

    pub fn advance_by(&mut self, d: SimDuration) {
        self.advance_to(self.world.now + d);
    }

    /// Runs until the robot says something, waits for a command, faults, the
    /// run ends, or `limit` is reached. Returns the records produced.
    pub fn advance_until_attention(&mut self, limit: SimTime) -> &[TraceRecord] {
        let from = self.world.trace.records.last().map_or(0, |r| r.seq + 1);
        loop {
            if self.finished.is_some() {
                break;
            }
            let said = self.world.trace.since(from).iter().any(|r| {
                matches!(
                    r.body,
                    RecordBody::Utterance {
                        speaker: Speaker::Robot,
                        ..
                    }
                )
            });
            let stuck = match self.world.robot.mode() {
                RobotMode::Faulted { .. } => true,
                RobotMode::Blocked { reason } => reason == WAIT_FOR_NEXT || reason == WAIT_PAUSED,
                _ => false,
            };
            if said || stuck || self.world.now >= limit {
                break;
            }
            match self.next_time() {
                Some(n) if n <= limit.min(self.max_time) => self.process_instant(n),
                _ => {
                    self.advance_to(limit);
                    break;
                }
            }
            self.settle();
            self.check_done();
        }
        self.world.trace.since(from)
    }

    /// Operator speech at the current instant.
    pub fn say(&mut self, text: &str) -> Result<Exchange, BackendError> {
        let env = RequestEnvelope::utterance(EVENT_SESSION, text).with_mode(self.world.mode);
        self.handle_envelope(&env)
    }

    /// Runs one front-end request against the world at the current instant.
    pub fn handle_envelope(&mut self, env: &RequestEnvelope) -> Result<Exchange, BackendError> {
        let session = (env.session != EVENT_SESSION).then(|| env.session.clone());
        if env.kind != RequestKind::Control {
            self.world.trace.push(
                self.world.now,
                RecordBody::Utterance {
                    speaker: Speaker::User,
                    text: env.text.clone(),
                    session: session.clone(),
                },
            );
        }
        let now = self.world.now;
        let result = self.backend.handle_request(env, &mut self.world, now);
        match &result {
            Ok(ex) => self.record_outcomes(&ex.outcomes, session),
            Err(e) => {
                self.world.trace.push(
                    self.world.now,
                    RecordBody::Dialogue {
                        outcome: "error".into(),
                        detail: Some(e.to_string()),
                    },
                );
            }
        }
        self.arm_prompts();
        self.settle();
        self.check_done();
        result
    }

    /// Publishes an outside event to the back-end at the current instant.
    pub fn publish(&mut self, event: BackendEvent) -> Vec<Invocation> {
        let inv = self.publish_now(&event);
        self.arm_prompts();
        self.settle();
        self.check_done();
        inv
    }

    pub fn snapshot(&self) -> SimSnapshot {
        let w = &self.world;
        SimSnapshot {
            t: w.now,
            mode: w.mode,
            robot: w.robot.mode().clone(),
            robot_status: w.robot.status_text(),
            operator: match &w.human {
                Human::Free => "free".into(),
                Human::Committed(s) => format!("starting {s}"),
                Human::JoinWait(s) => format!("waiting at {s}"),
                Human::Working(s) => format!("working on {s}"),
                Human::Joint(s) => format!("working with the robot on {s}"),
                Human::Occupied => "busy".into(),
            },
            steps: w.progress.steps.clone(),
            locations: w.progress.locations.clone(),
            session: self.backend.session(EVENT_SESSION).map(|s| s.status()),
            trace_len: w.trace.len(),
            finished: self.finished,
        }
    }

    /// Metrics of the trace so far; an unfinished run is measured up to now.
    pub fn metrics(&self) -> Result<MetricsReport, MetricsError> {
        if self.finished.is_some() {
            return compute_metrics(&self.world.trace);
        }
        let mut t = self.world.trace.clone();
        t.push(
            self.world.now,
            RecordBody::SimEnd {
                reason: EndReason::Timeout,
                dropped_events: self.backend.dropped_events(),
            },
        );
        compute_metrics(&t)
    }

    fn next_time(&self) -> Option<SimTime> {
        let robot = self.world.robot.next_event_time();
        let heap = self.heap.keys().next().map(|k| k.0);
        match (robot, heap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn process_instant(&mut self, t: SimTime) {
        self.world.now = t;
        loop {
            if self.world.robot.next_event_time().is_some_and(|n| n <= t) || self.world.robot.now() < t {
                let events = self.world.robot.advance_to(t);
                let any = !events.is_empty();
                for ev in events {
                    self.world.on_robot_event(ev);
                }
                if any {
                    self.settle();
                }
                continue;
            }
            let Some(&key) = self.heap.keys().next().filter(|k| k.0 <= t) else {
                break;
            };
            let (armed, event) = self.heap.remove(&key).expect("key just seen");
            if let Some(a) = armed {
                self.armed.remove(&a);
            }
            self.handle(event);
            self.settle();
        }
    }

    fn handle(&mut self, event: Event) {
        let w = &mut self.world;
        match event {
            Event::StartStep(step) => {
                w.set_status(&step, StepStatus::Active);
                w.human = Human::Working(step.clone());
                let nominal = w.plan.step(&step).expect("planned step").nominal();
                let at = w.now + nominal.mul_f64(self.physical.speed_for(&step));
                self.push(at, None, Event::HumanDone(step));
            }
            Event::HumanDone(step) => {
                w.set_status(&step, StepStatus::Done);
                w.human = Human::Free;
            }
            Event::JoinJoint(step) => w.human = Human::JoinWait(step),
            Event::PhysicalReset => {
                w.start_reset();
                if w.human == Human::Occupied {
                    w.human = Human::Free;
                }
            }
            Event::Say(speech) => {
                if w.human == Human::Occupied {
                    w.human = Human::Free;
                }
                if !speech.answer && self.awaiting_slot() {
                    self.held.push_back(speech);
                    return;
                }
                if let Some(item) = &speech.item {
                    self.asked.push(item.clone());
                }
                // Outcomes are traced, errors included; nothing else to do.
                let _ = self.say(&speech.text);
            }
        }
    }

    fn push(&mut self, at: SimTime, armed: Option<String>, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.insert((at, event.class(), seq), (armed, event));
    }

    fn draw(&mut self, policy_key: &str, latency: &crate::rng::Latency) -> SimDuration {
        let n = self.draws.entry(policy_key.to_owned()).or_insert(0);
        let mut r = rng::stream(self.seed, &format!("operator/{policy_key}"), *n);
        *n += 1;
        latency.draw(&mut r)
    }

    /// Schedules a reaction once per `key`. Returns false if already armed or
    /// the policy waits for a free operator who is busy.
    fn arm(&mut self, key: String, policy_key: &str, event: Event) -> bool {
        if self.armed.contains(&key) {
            return false;
        }
        let spoken = matches!(event, Event::Say(_));
        let policy = if spoken {
            self.profile.policy(policy_key)
        } else {
            self.physical.policy(policy_key)
        };
        if policy.when_free && self.world.human != Human::Free {
            return false;
        }
        let stream = format!("{}/{policy_key}", if spoken { "speech" } else { "physical" });
        let lat = self.draw(&stream, &policy.latency);
        let at = if spoken {
            let at = self.world.now.max(self.voice_free) + lat;
            self.voice_free = at;
            at
        } else {
            self.world.now + lat
        };
        if policy.when_free {
            self.world.human = Human::Occupied;
        }
        self.armed.insert(key.clone());
        self.push(at, Some(key), event);
        true
    }

    fn speech(&self, policy_key: &str, default: &str, value: &str) -> String {
        self.profile
            .policy(policy_key)
            .say
            .unwrap_or_else(|| default.to_owned())
            .replace("{item}", value)
            .replace("{value}", value)
    }

    fn settle(&mut self) {
        for _ in 0..SETTLE_LIMIT {
            let mut changed = self.world.update_readiness();
            changed |= self.robot_dispatch();
            changed |= self.operator_triggers();
            changed |= self.human_dispatch();
            changed |= self.flush_events();
            if !changed {
                return;
            }
        }
        panic!("simulation state did not settle at t={}", self.world.now);
    }

    fn check_done(&mut self) -> bool {
        if self.finished.is_some() {
            return true;
        }
        if !self.world.progress.all_done() {
            return false;
        }
        if self.world.conversational() {
            self.publish_now(&BackendEvent::new("assembly_complete"));
        }
        self.finish(EndReason::Completed);
        true
    }

    fn finish(&mut self, reason: EndReason) {
        self.world.trace.push(
            self.world.now,
            RecordBody::SimEnd {
                reason,
                dropped_events: self.backend.dropped_events(),
            },
        );
        self.finished = Some(reason);
    }

    fn flush_events(&mut self) -> bool {
        if self.world.events.is_empty() {
            return false;
        }
        for ev in std::mem::take(&mut self.world.events) {
            self.publish_now(&ev);
        }
        self.arm_prompts();
        true
    }

    fn publish_now(&mut self, event: &BackendEvent) -> Vec<Invocation> {
        let invocations = self.backend.publish_event(event, self.world.now);
        for inv in &invocations {
            self.world.trace.push(
                self.world.now,
                RecordBody::Dialogue {
                    outcome: if inv.queued { "queued" } else { "initiated" }.into(),
                    detail: Some(inv.dialogue.clone()),
                },
            );
            let session = (inv.session != EVENT_SESSION).then(|| inv.session.clone());
            self.record_outcomes(&inv.outcomes, session);
        }
        invocations
    }

    fn record_outcomes(&mut self, outcomes: &[TurnOutcome], session: Option<String>) {
        let now = self.world.now;
        for o in outcomes {
            if let Some(text) = o.speech() {
                self.world.trace.push(
                    now,
                    RecordBody::Utterance {
                        speaker: Speaker::Robot,
                        text: text.to_owned(),
                        session: session.clone(),
                    },
                );
            }
            let (outcome, detail) = match o {
                TurnOutcome::RobotSay { .. } => continue,
                TurnOutcome::PromptSlot { slot, .. } => ("prompt_slot", Some(slot.clone())),
                TurnOutcome::Dispatch { request } => ("dispatch", request.intent.clone()),
                TurnOutcome::ConversationEnded => ("conversation_ended", None),
            };
            self.world.trace.push(
                now,
                RecordBody::Dialogue {
                    outcome: outcome.into(),
                    detail,
                },
            );
        }
    }

    /// Answers whatever the robot is currently asking the operator.
    fn arm_prompts(&mut self) {
        if self.operator == OperatorKind::External {
            return;
        }
        let Some(state) = self.backend.session(EVENT_SESSION) else {
            return;
        };
        let turns = state.turn_log().len();
        match state.awaiting() {
            Some(AwaitingInput::Slot(slot)) => {
                let key = format!("slot:{slot}");
                let value = self.asked.last().map_or_else(|| "it".to_owned(), |i| self.world.label(i));
                let text = self.speech(&key, "the {value}", &value);
                let speech = Speech {
                    text,
                    item: None,
                    answer: true,
                };
                self.arm(format!("{key}#{turns}"), &key, Event::Say(speech));
            }
            Some(AwaitingInput::Reply(dialogue)) => {
                let key = format!("prompt:{dialogue}");
                let default = match dialogue.as_str() {
                    "assist_recovery" => "yes it is done",
                    "report_problem" => "yes try again",
                    "confirm_next_step" => "yes lets start",
                    _ => "yes",
                };
                let text = self.speech(&key, default, "");
                self.arm(format!("{key}#{turns}"), &key, Event::Say(Speech::plain(text)));
            }
            None => {}
        }
    }

    fn robot_dispatch(&mut self) -> bool {
        let w = &mut self.world;
        if matches!(w.robot.mode(), RobotMode::Executing { .. } | RobotMode::Faulted { .. }) {
            return false;
        }
        if w.paused {
            return w.set_robot_wait(Some(WAIT_PAUSED));
        }
        let stale = |t: &Task, w: &World| matches!(t, Task::Deliver(i) if w.progress.available(i));
        let keep: Vec<bool> = w.agenda.iter().map(|t| !stale(t, w)).collect();
        let mut it = keep.into_iter();
        w.agenda.retain(|_| it.next().unwrap_or(true));
        let keep: Vec<bool> = w.requests.iter().map(|t| !stale(t, w)).collect();
        let mut it = keep.into_iter();
        w.requests.retain(|_| it.next().unwrap_or(true));

        let flexible = w.conversational();
        let candidates: Vec<Task> = if flexible {
            let mut all: Vec<Task> = w.requests.iter().chain(w.agenda.iter()).cloned().collect();
            all.sort_by_key(|t| w.urgency(t));
            all
        } else {
            w.agenda.first().cloned().into_iter().collect()
        };
        let mut wait: Option<&'static str> = None;
        for task in candidates {
            match self.classify(&task) {
                Some(Ok(())) => {
                    let w = &mut self.world;
                    if w.needs_permit() && !w.permit {
                        return w.set_robot_wait(Some(WAIT_FOR_NEXT));
                    }
                    w.permit = false;
                    w.start_task(task);
                    return true;
                }
                Some(Err(reason)) => {
                    let w = &mut self.world;
                    if reason == WAIT_FOR_OPERATOR && w.needs_permit() && !w.permit {
                        return w.set_robot_wait(Some(WAIT_FOR_NEXT));
                    }
                    wait.get_or_insert(reason);
                }
                None => {}
            }
        }
        self.world.set_robot_wait(wait)
    }

    /// `None` while prerequisites are missing, `Some(Err)` when only a human
    /// go-ahead is missing, `Some(Ok)` when the task can start.
    fn classify(&mut self, task: &Task) -> Option<Result<(), &'static str>> {
        let w = &mut self.world;
        let step = match task {
            Task::Deliver(_) | Task::Hold(_) => return Some(Ok(())),
            Task::Step(step) => step.clone(),
        };
        if w.progress.status(&step) != Some(StepStatus::Ready) || !w.items_ready(&step) {
            return None;
        }
        if w.actor(&step) != Actor::Joint {
            return Some(Ok(()));
        }
        let with_operator = matches!(&w.human, Human::Free) || w.human == Human::JoinWait(step.clone());
        if !w.comm {
            return if w.human == Human::JoinWait(step) {
                Some(Ok(()))
            } else {
                Some(Err(WAIT_FOR_OPERATOR))
            };
        }
        if w.conversational() && !w.joint_go.contains(&step) {
            if w.joint_announced.insert(step.clone()) {
                let label = w.plan.step(&step).map(|s| s.description.clone()).unwrap_or_default();
                w.events
                    .push(BackendEvent::new("joint_ready").with("step", step.clone()).with("step_label", label));
            }
            return Some(Err(WAIT_FOR_CONFIRM));
        }
        if with_operator {
            Some(Ok(()))
        } else {
            Some(Err(WAIT_FOR_OPERATOR))
        }
    }

    fn operator_triggers(&mut self) -> bool {
        let mut changed = false;
        let ordinal = self.world.robot.actions_started();
        let faulted = matches!(self.world.robot.mode(), RobotMode::Faulted { .. });
        if faulted && !self.world.comm {
            changed |= self.arm(format!("reset#{ordinal}"), "robot_faulted", Event::PhysicalReset);
        }
        if self.operator == OperatorKind::External || !self.world.comm {
            return changed;
        }
        if self.world.mode == Mode::Baseline {
            if faulted {
                let text = self.speech("robot_faulted", "reset", "");
                changed |= self.arm(format!("reset#{ordinal}"), "robot_faulted", Event::Say(Speech::plain(text)));
            }
            let waiting = matches!(self.world.robot.mode(), RobotMode::Blocked { reason } if reason == WAIT_FOR_NEXT);
            if waiting && !self.world.permit {
                let text = self.speech("robot_waiting", "next", "");
                changed |= self.arm(format!("next#{ordinal}"), "robot_waiting", Event::Say(Speech::plain(text)));
            }
            return changed;
        }
        if !self.held.is_empty() && !self.awaiting_slot() {
            let speech = self.held.pop_front().expect("non-empty");
            self.push(self.world.now, None, Event::Say(speech));
            changed = true;
        }
        let settled: Vec<String> = self
            .open_asks
            .iter()
            .filter(|item| !self.speech_pending(item) && !self.awaiting_slot())
            .cloned()
            .collect();
        for item in settled {
            self.open_asks.remove(&item);
        }
        // Ask ahead for what the next few manual steps need.
        let lookahead = self.profile.lookahead;
        let upcoming: Vec<String> = self.world.upcoming_human_steps().take(lookahead).map(str::to_owned).collect();
        for step in upcoming {
            let needs = self.world.plan.step(&step).map(|s| s.needs.clone()).unwrap_or_default();
            for item in needs {
                let w = &self.world;
                if w.progress.location(&item) == Location::SharedBench
                    || w.in_transit(&item)
                    || self.open_asks.contains(&item)
                    || self.ask_count.get(&item).copied().unwrap_or(0) >= MAX_ASKS
                {
                    continue;
                }
                let label = w.label(&item);
                let default = match w.plan.item(&item).map(|i| i.kind) {
                    Some(crate::assembly::ItemKind::Tool) => "give me the {item}",
                    _ => "bring the {item}",
                };
                let text = match self.profile.phrasing.get(&item) {
                    Some(p) => p.clone(),
                    None => self.speech("item_needed", default, &label),
                };
                let speech = Speech {
                    text,
                    item: Some(item.clone()),
                    answer: false,
                };
                if self.arm(format!("item:{item}"), "item_needed", Event::Say(speech)) {
                    *self.ask_count.entry(item.clone()).or_insert(0) += 1;
                    self.open_asks.insert(item);
                    changed = true;
                }
            }
        }
        changed
    }

    fn awaiting_slot(&self) -> bool {
        self.backend
            .session(EVENT_SESSION)
            .is_some_and(|s| matches!(s.awaiting(), Some(AwaitingInput::Slot(_))))
    }

    fn speech_pending(&self, item: &str) -> bool {
        let about = |s: &Speech| s.item.as_deref() == Some(item);
        self.held.iter().any(about) || self.heap.values().any(|(_, e)| matches!(e, Event::Say(s) if about(s)))
    }

    fn human_dispatch(&mut self) -> bool {
        if self.world.human != Human::Free {
            return false;
        }
        let w = &self.world;
        let pick = w.order.iter().find(|s| {
            let actor = w.actor(s);
            let joins = actor == Actor::Joint && !w.comm;
            (actor == Actor::Human || joins) && w.progress.status(s) == Some(StepStatus::Ready) && w.items_ready(s)
        });
        let Some(step) = pick.cloned() else {
            return false;
        };
        let (policy, event) = if self.world.actor(&step) == Actor::Joint {
            ("joint_ready", Event::JoinJoint(step.clone()))
        } else {
            ("step_ready", Event::StartStep(step.clone()))
        };
        if self.arm(format!("start:{step}"), policy, event) {
            self.world.human = Human::Committed(step);
            true
        } else {
            false
        }
    }
}

/// Runs a scenario with the scripted operator.
pub fn run_scenario(scenario: &Scenario) -> Trace {
    Sim::new(scenario, OperatorKind::Scripted).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyPlan;
    use crate::fixtures;
    use crate::metrics::compute_metrics;
    use crate::sim::ScenarioConfig;

    fn quiet(mode: Mode) -> Scenario {
        let mut cfg = fixtures::reference_config();
        cfg.mode = mode;
        cfg.failures = Default::default();
        cfg.operator = Default::default();
        cfg.prestaged = fixtures::reference_plan().items.iter().map(|i| i.id.clone()).collect();
        fixtures::scenario_from(cfg)
    }

    #[test]
    fn ideal_run_takes_the_critical_path() {
        let cp = fixtures::reference_plan().critical_path();
        assert_eq!(cp, SimDuration::from_secs(152.0));
        for mode in [Mode::Conversational, Mode::Baseline] {
            let trace = run_scenario(&quiet(mode));
            assert_eq!(trace.end(), Some((SimTime::ZERO + cp, EndReason::Completed)), "{mode}");
        }
    }

    fn three_step(mode: Mode, schedule: Vec<f64>) -> Scenario {
        let plan = AssemblyPlan::from_json(
            r#"{"version":1,"id":"mini","steps":[
                {"id":"r1","actor":"robot","needs":[],"duration":10,"description":"pick the part"},
                {"id":"h1","actor":"human","needs":[],"duration":5,"description":"inspect the part"},
                {"id":"r2","actor":"robot","needs":[],"duration":10,"description":"stack the part"}],
              "precedence":[["r1","h1"],["h1","r2"]],"items":[]}"#,
        )
        .unwrap();
        let cfg = ScenarioConfig::from_json(&format!(
            r#"{{"version":1,"id":"mini","mode":"{mode}","seed":1,"plan":"p","script":"s","baseline_script":"b",
               "robot":{{"fetch":1,"deliver":1,"hold":1,"reset":4}},
               "failures":{{"schedule":{schedule:?}}},
               "operator":{{"baseline":{{"policies":{{"robot_faulted":{{"latency":{{"constant":3}}}}}}}}}},
               "max_time":100}}"#
        ))
        .unwrap();
        Scenario::from_parts(cfg, plan, fixtures::reference_script(), fixtures::baseline_script()).unwrap()
    }

    #[test]
    fn baseline_fault_lasts_until_reset_is_said() {
        let trace = run_scenario(&three_step(Mode::Baseline, vec![5.0]));
        let lines: Vec<(f64, String)> = trace
            .records
            .iter()
            .filter_map(|r| match &r.body {
                RecordBody::Robot { event, action, .. } => {
                    Some((r.t.as_secs_f64(), format!("{event:?} {}", action.as_deref().unwrap_or("-"))))
                }
                RecordBody::Utterance { speaker, text, .. } => Some((r.t.as_secs_f64(), format!("{speaker:?}: {text}"))),
                _ => None,
            })
            .collect();
        let fault = lines.iter().position(|(_, l)| l == "Failed assist_step").expect("fault recorded");
        assert_eq!(lines[fault].0, 5.0);
        // Nothing happens to the robot between the fault and the reset command.
        assert_eq!(lines[fault + 1], (8.0, "User: reset".to_owned()));
        assert_eq!(lines[fault + 2], (8.0, "Started reset".to_owned()));
        assert_eq!(lines[fault + 3], (8.0, "Robot: Resetting.".to_owned()));
        let m = compute_metrics(&trace).unwrap();
        assert_eq!(m.failures, 1);
        assert_eq!(trace.end().unwrap().1, EndReason::Completed);
    }

    #[test]
    fn conversational_failure_is_reported_to_the_operator() {
        let trace = run_scenario(&three_step(Mode::Conversational, vec![5.0]));
        let said: Vec<&str> = trace.utterances().map(|(_, _, t)| t).collect();
        assert!(said.contains(&"I could not reach the work position to pick the part. Should I try again?"));
        assert!(said.contains(&"yes try again"));
        assert_eq!(trace.end().unwrap().1, EndReason::Completed);
    }

    #[test]
    fn unreachable_goal_times_out_at_max_time() {
        let mut cfg = fixtures::reference_config();
        cfg.max_time = 30.0;
        let trace = run_scenario(&fixtures::scenario_from(cfg));
        assert_eq!(trace.end(), Some((SimTime::from_secs(30.0), EndReason::Timeout)));
        assert!(trace.records.iter().all(|r| r.t <= SimTime::from_secs(30.0)));
    }

    #[test]
    fn external_operator_can_drive_a_run() {
        let mut sim = Sim::new(&quiet(Mode::Baseline), OperatorKind::External);
        // Already waiting at start, so there is nothing to advance through.
        assert!(sim.advance_until_attention(SimTime::from_secs(50.0)).is_empty());
        assert!(matches!(sim.snapshot().robot, RobotMode::Blocked { reason } if reason == WAIT_FOR_NEXT));
        let ex = sim.say("next").unwrap();
        assert_eq!(ex.response.speech, "Next.");
        assert_eq!(sim.snapshot().robot.name(), "executing");
        let ex = sim.say("reset").unwrap();
        assert_eq!(ex.response.speech, "Nothing to reset.");
        sim.advance_to(sim.max_time());
        assert_eq!(sim.end_reason(), Some(EndReason::Timeout));
    }
}
