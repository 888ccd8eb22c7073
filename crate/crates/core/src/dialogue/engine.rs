use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::session::{ActiveDialogue, PendingSlot, QueuedInitiation, SessionState, SessionStatus, Speaker};
use super::{render, Trigger};
use crate::backend::{ReplyContext, RequestContext, RequestEnvelope, RequestKind, ResponseEnvelope, PROTOCOL_VERSION};
use crate::intent::MatchResult;
use crate::script::CompiledScript;
use crate::time::SimTime;

pub const CLARIFY_LINE: &str = "Sorry, I did not understand that. Could you rephrase?";
pub const GIVE_UP_LINE: &str = "I am having trouble understanding. Let us try again later.";
pub const RETRY_EXHAUSTED_LINE: &str = "Sorry, I could not get that detail. Let us start over.";
const REPROMPT_PREFIX: &str = "Sorry, I didn't catch that. ";
const MAX_NO_MATCH: u8 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TurnOutcome {
    RobotSay { text: String },
    PromptSlot { slot: String, text: String },
    Dispatch { request: RequestEnvelope },
    ConversationEnded,
}

impl TurnOutcome {
    /// The robot line this outcome speaks, if any.
    pub fn speech(&self) -> Option<&str> {
        match self {
            TurnOutcome::RobotSay { text } | TurnOutcome::PromptSlot { text, .. } => Some(text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DialogueError {
    #[error("out of turn: session is {0:?}")]
    OutOfTurn(SessionStatus),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("unknown dialogue {0:?}")]
    UnknownDialogue(String),
    #[error("dialogue {0:?} is not opened by an API call")]
    NotInitiable(String),
}

/// Stateless driver; all conversation state lives in `SessionState`.
#[derive(Clone)]
pub struct DialogueEngine {
    script: Arc<CompiledScript>,
}

type Outcomes = Vec<TurnOutcome>;

impl DialogueEngine {
    pub fn new(script: Arc<CompiledScript>) -> Self {
        DialogueEngine { script }
    }

    pub fn script(&self) -> &Arc<CompiledScript> {
        &self.script
    }

    pub fn user_turn(&self, s: &mut SessionState, text: &str, at: SimTime) -> Result<Outcomes, DialogueError> {
        if matches!(s.status, SessionStatus::AwaitingBackend | SessionStatus::Terminal) {
            return Err(DialogueError::OutOfTurn(s.status));
        }
        s.log(Speaker::User, text, at);
        s.last_user_text = text.to_owned();
        s.answered_slot = false;
        let mut out = Vec::new();

        if let Some(pending) = s.pending_slot.clone() {
            let active = s.active.as_ref().expect("pending slot implies active dialogue");
            let intent = active.intent.clone().unwrap_or_default();
            match self.script.matcher().resolve_slot_answer(&intent, &pending.slot, text) {
                Some(value) => {
                    s.pending_slot = None;
                    s.answered_slot = true;
                    s.active.as_mut().unwrap().slots.insert(pending.slot, value);
                    self.advance(s, at, &mut out);
                }
                None => {
                    let def = self.script.dialogue(&active.dialogue).expect("validated");
                    if pending.prompts > def.max_slot_retries {
                        self.say(s, RETRY_EXHAUSTED_LINE, at, &mut out);
                        self.end(s, false, at, &mut out);
                    } else {
                        let prompt = format!("{REPROMPT_PREFIX}{}", slot_prompt(def, &pending.slot));
                        s.pending_slot.as_mut().unwrap().prompts += 1;
                        s.log(Speaker::Robot, &prompt, at);
                        out.push(TurnOutcome::PromptSlot {
                            slot: pending.slot,
                            text: prompt,
                        });
                    }
                }
            }
            return Ok(out);
        }

        match self.script.matcher().match_text(text) {
            MatchResult::NoMatch => {
                s.no_match_streak += 1;
                if s.no_match_streak >= MAX_NO_MATCH {
                    self.say(s, GIVE_UP_LINE, at, &mut out);
                    self.end(s, false, at, &mut out);
                } else {
                    self.say(s, CLARIFY_LINE, at, &mut out);
                }
            }
            MatchResult::Matched(m) => {
                s.no_match_streak = 0;
                let def = self.script.dialogue_for_intent(&m.intent).expect("validated");
                let reply_to = s.active.as_ref().filter(|a| a.awaiting_reply).map(|a| ReplyContext {
                    dialogue: a.dialogue.clone(),
                    slots: a.slots.clone(),
                });
                s.active = Some(ActiveDialogue {
                    dialogue: def.id.clone(),
                    intent: Some(m.intent),
                    slots: m.filled,
                    reply_to,
                    awaiting_reply: false,
                });
                self.advance(s, at, &mut out);
            }
        }
        Ok(out)
    }

    pub fn backend_result(
        &self,
        s: &mut SessionState,
        response: &ResponseEnvelope,
        at: SimTime,
    ) -> Result<Outcomes, DialogueError> {
        if s.status != SessionStatus::AwaitingBackend {
            return Err(DialogueError::OutOfTurn(s.status));
        }
        response
            .validate()
            .map_err(|e| DialogueError::ProtocolViolation(e.to_string()))?;
        if response.session != s.id() {
            return Err(DialogueError::ProtocolViolation(format!(
                "response for session {:?} delivered to {:?}",
                response.session,
                s.id()
            )));
        }
        if let Some(f) = &response.follow_up {
            if self.script.dialogue(f).is_none() {
                return Err(DialogueError::ProtocolViolation(format!("unknown follow-up {f:?}")));
            }
        }
        let mut out = Vec::new();
        self.say(s, &response.speech, at, &mut out);
        match &response.follow_up {
            Some(f) => {
                let payload = s.active.as_ref().map(|a| a.slots.clone()).unwrap_or_default();
                self.open(s, f, payload, at, &mut out);
            }
            None => self.end(s, response.end, at, &mut out),
        }
        Ok(out)
    }

    pub fn initiate_dialogue(
        &self,
        s: &mut SessionState,
        dialogue: &str,
        payload: BTreeMap<String, String>,
        at: SimTime,
    ) -> Result<Outcomes, DialogueError> {
        let def = self
            .script
            .dialogue(dialogue)
            .ok_or_else(|| DialogueError::UnknownDialogue(dialogue.to_owned()))?;
        if !matches!(def.trigger, Trigger::ApiCall(_)) {
            return Err(DialogueError::NotInitiable(dialogue.to_owned()));
        }
        let mut out = Vec::new();
        match s.status {
            SessionStatus::Idle | SessionStatus::Terminal => self.open(s, dialogue, payload, at, &mut out),
            _ => s.queued.push_back(QueuedInitiation {
                dialogue: dialogue.to_owned(),
                payload,
            }),
        }
        Ok(out)
    }

    /// Closes a conversation left waiting on the user, e.g. when a host decides
    /// the user ignored a robot question. No-op unless awaiting the user.
    pub fn expire(&self, s: &mut SessionState, at: SimTime) -> Outcomes {
        let mut out = Vec::new();
        if s.status == SessionStatus::AwaitingUser {
            self.end(s, false, at, &mut out);
        }
        out
    }

    /// Fills, prompts or completes the active user-intent dialogue.
    fn advance(&self, s: &mut SessionState, at: SimTime, out: &mut Outcomes) {
        let active = s.active.as_ref().expect("active dialogue");
        let def = self.script.dialogue(&active.dialogue).expect("validated");
        let intent = active.intent.as_deref().and_then(|i| self.script.intent(i));
        let missing = intent.and_then(|i| i.required_slots().find(|spec| !active.slots.contains_key(&spec.name)));
        if let Some(spec) = missing {
            let slot = spec.name.clone();
            let text = slot_prompt(def, &slot).to_owned();
            s.pending_slot = Some(PendingSlot {
                slot: slot.clone(),
                prompts: 1,
            });
            s.status = SessionStatus::AwaitingUser;
            s.log(Speaker::Robot, &text, at);
            out.push(TurnOutcome::PromptSlot { slot, text });
            return;
        }
        if def.dispatch {
            let request = RequestEnvelope {
                version: PROTOCOL_VERSION,
                session: s.id().to_owned(),
                kind: if s.answered_slot {
                    RequestKind::SlotAnswer
                } else {
                    RequestKind::Utterance
                },
                text: s.last_user_text.clone(),
                context: RequestContext {
                    mode: None,
                    sim_time: Some(at),
                },
                intent: active.intent.clone(),
                slots: active.slots.clone(),
                reply_to: active.reply_to.clone(),
            };
            s.status = SessionStatus::AwaitingBackend;
            out.push(TurnOutcome::Dispatch { request });
            return;
        }
        let line = render(&def.reply_template, &active.slots);
        let follow_up = def.follow_up.clone();
        let payload = active.slots.clone();
        self.say(s, &line, at, out);
        match follow_up {
            Some(f) => self.open(s, &f, payload, at, out),
            None => self.end(s, false, at, out),
        }
    }

    /// Opens a dialogue with its robot turn.
    fn open(&self, s: &mut SessionState, id: &str, payload: BTreeMap<String, String>, at: SimTime, out: &mut Outcomes) {
        let mut id = id.to_owned();
        loop {
            let def = self.script.dialogue(&id).expect("validated reference");
            s.pending_slot = None;
            s.no_match_streak = 0;
            s.active = Some(ActiveDialogue {
                dialogue: id.clone(),
                intent: None,
                slots: payload.clone(),
                reply_to: None,
                awaiting_reply: def.expect_reply,
            });
            let line = render(&def.reply_template, &payload);
            self.say(s, &line, at, out);
            if def.expect_reply {
                s.status = SessionStatus::AwaitingUser;
                return;
            }
            match &def.follow_up {
                Some(f) => id = f.clone(),
                None => {
                    self.end(s, false, at, out);
                    return;
                }
            }
        }
    }

    fn say(&self, s: &mut SessionState, text: &str, at: SimTime, out: &mut Outcomes) {
        s.log(Speaker::Robot, text, at);
        out.push(TurnOutcome::RobotSay { text: text.to_owned() });
    }

    /// Ends the current conversation and delivers the next queued initiation.
    fn end(&self, s: &mut SessionState, terminal: bool, at: SimTime, out: &mut Outcomes) {
        s.active = None;
        s.pending_slot = None;
        s.no_match_streak = 0;
        s.status = if terminal {
            SessionStatus::Terminal
        } else {
            SessionStatus::Idle
        };
        out.push(TurnOutcome::ConversationEnded);
        if let Some(next) = s.queued.pop_front() {
            self.open(s, &next.dialogue, next.payload, at, out);
        }
    }
}

fn slot_prompt<'a>(def: &'a super::DialogueDef, slot: &str) -> &'a str {
    def.slot_prompts.get(slot).map(String::as_str).unwrap_or("Could you tell me more?")
}
