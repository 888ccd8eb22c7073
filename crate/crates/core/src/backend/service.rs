use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::envelope::{Mode, ProtocolError, RequestEnvelope, RequestKind, ResponseEnvelope, PROTOCOL_VERSION};
use super::rules::{BackendEvent, EventRule};
use crate::dialogue::{DialogueEngine, DialogueError, SessionState, SessionStatus, TurnOutcome};
use crate::script::CompiledScript;
use crate::time::SimTime;

pub const DEFAULT_GREETING: &str = "Hello, I am ready to help.";
/// Session that receives events without an explicit target.
pub const EVENT_SESSION: &str = "operator";

/// Executes dispatched requests against the world (simulated robot, plan).
pub trait Fulfiller {
    fn fulfil(&mut self, request: &RequestEnvelope) -> ResponseEnvelope;
    /// Short stable description of world state, hashed into responses.
    fn state_digest(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    BadEnvelope(#[from] ProtocolError),
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("session {0:?} is busy delivering a robot-initiated turn")]
    SessionBusy(String),
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
}

/// Result of one `/skill` round trip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exchange {
    pub response: ResponseEnvelope,
    pub outcomes: Vec<TurnOutcome>,
    pub created: bool,
}

/// One rule firing from `publish_event`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Invocation {
    pub rule: usize,
    pub dialogue: String,
    pub session: String,
    pub payload: BTreeMap<String, String>,
    /// Outcomes produced now; empty when the initiation was queued.
    pub outcomes: Vec<TurnOutcome>,
    pub queued: bool,
}

struct SessionSlot {
    state: Mutex<SessionState>,
    delivering: AtomicBool,
}

/// Session registry plus rule table. Requests for different sessions run
/// concurrently; requests for one session are serialized by its lock.
pub struct Backend {
    engine: DialogueEngine,
    rules: Vec<EventRule>,
    mode: Mode,
    sessions: Mutex<BTreeMap<String, Arc<SessionSlot>>>,
    dropped: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// First 12 hex digits of the SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

impl Backend {
    pub fn new(script: Arc<CompiledScript>, mode: Mode) -> Self {
        let rules = script.script().event_rules.clone();
        Backend {
            engine: DialogueEngine::new(script),
            rules,
            mode,
            sessions: Mutex::new(BTreeMap::new()),
            dropped: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn engine(&self) -> &DialogueEngine {
        &self.engine
    }

    pub fn dropped_events(&self) -> u64 {
        self.dropped.load(Ordering::SeqCst)
    }

    pub fn session_ids(&self) -> Vec<String> {
        lock(&self.sessions).keys().cloned().collect()
    }

    pub fn session(&self, id: &str) -> Option<SessionState> {
        let slot = lock(&self.sessions).get(id).cloned()?;
        let state = lock(&slot.state).clone();
        Some(state)
    }

    fn slot(&self, id: &str) -> (Arc<SessionSlot>, bool) {
        let mut sessions = lock(&self.sessions);
        if let Some(s) = sessions.get(id) {
            return (s.clone(), false);
        }
        let slot = Arc::new(SessionSlot {
            state: Mutex::new(SessionState::new(id)),
            delivering: AtomicBool::new(false),
        });
        sessions.insert(id.to_owned(), slot.clone());
        (slot, true)
    }

    pub fn handle_request(
        &self,
        env: &RequestEnvelope,
        fulfiller: &mut dyn Fulfiller,
        at: SimTime,
    ) -> Result<Exchange, BackendError> {
        env.validate()?;
        if let Some(m) = &env.context.mode {
            match m.parse::<Mode>() {
                Ok(mode) if mode == self.mode => {}
                _ => return Err(BackendError::UnknownMode(m.clone())),
            }
        }
        let (slot, created) = self.slot(&env.session);
        if slot.delivering.load(Ordering::SeqCst) {
            return Err(BackendError::SessionBusy(env.session.clone()));
        }
        let mut state = lock(&slot.state);
        if slot.delivering.load(Ordering::SeqCst) {
            return Err(BackendError::SessionBusy(env.session.clone()));
        }

        let mut follow_up = None;
        let outcomes = match env.kind {
            RequestKind::Control => match env.text.trim() {
                "" | "start" => {
                    let greeting = self.engine.script().script().greeting.as_deref().unwrap_or(DEFAULT_GREETING);
                    let response = ResponseEnvelope {
                        version: PROTOCOL_VERSION,
                        session: env.session.clone(),
                        speech: greeting.to_owned(),
                        follow_up: None,
                        end: false,
                        state_digest: digest(&fulfiller.state_digest()),
                    };
                    return Ok(Exchange {
                        response,
                        outcomes: vec![TurnOutcome::RobotSay {
                            text: greeting.to_owned(),
                        }],
                        created,
                    });
                }
                "end" => {
                    state.abort(true);
                    vec![TurnOutcome::RobotSay { text: "Goodbye.".into() }, TurnOutcome::ConversationEnded]
                }
                other => {
                    return Err(ProtocolError::BadEnvelope(format!("unknown control command {other:?}")).into());
                }
            },
            RequestKind::Utterance | RequestKind::SlotAnswer => {
                state.reopen();
                let mut outcomes = self.engine.user_turn(&mut state, &env.text, at)?;
                while let Some(TurnOutcome::Dispatch { request }) = outcomes.last().cloned() {
                    let mut request = request;
                    request.context.mode = Some(self.mode.as_str().to_owned());
                    let response = fulfiller.fulfil(&request);
                    follow_up = response.follow_up.clone();
                    match self.engine.backend_result(&mut state, &response, at) {
                        Ok(more) => outcomes.extend(more),
                        Err(e) => {
                            state.abort(false);
                            return Err(e.into());
                        }
                    }
                }
                outcomes
            }
        };

        let speech: Vec<&str> = outcomes.iter().filter_map(TurnOutcome::speech).collect();
        let response = ResponseEnvelope {
            version: PROTOCOL_VERSION,
            session: env.session.clone(),
            speech: speech.join(" "),
            follow_up,
            end: state.status() == SessionStatus::Terminal,
            state_digest: digest(&fulfiller.state_digest()),
        };
        Ok(Exchange {
            response,
            outcomes,
            created,
        })
    }

    /// Fires every matching rule in declaration order.
    pub fn publish_event(&self, event: &BackendEvent, at: SimTime) -> Vec<Invocation> {
        let mut fired = Vec::new();
        for (index, rule) in self.rules.iter().enumerate() {
            if !rule.matches(event) {
                continue;
            }
            let session = event.session.clone().unwrap_or_else(|| EVENT_SESSION.to_owned());
            let payload = rule.payload_for(event);
            let (slot, _) = self.slot(&session);
            let mut state = lock(&slot.state);
            slot.delivering.store(true, Ordering::SeqCst);
            let result = self.engine.initiate_dialogue(&mut state, &rule.dialogue, payload.clone(), at);
            slot.delivering.store(false, Ordering::SeqCst);
            let outcomes = match result {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("rule {index} could not open {:?}: {e}", rule.dialogue);
                    continue;
                }
            };
            fired.push(Invocation {
                rule: index,
                dialogue: rule.dialogue.clone(),
                session,
                payload,
                queued: outcomes.is_empty(),
                outcomes,
            });
        }
        if fired.is_empty() {
            self.dropped.fetch_add(1, Ordering::SeqCst);
        }
        fired
    }

    /// Closes a robot question nobody answered.
    pub fn expire(&self, session: &str, at: SimTime) -> Vec<TurnOutcome> {
        let slot = match lock(&self.sessions).get(session).cloned() {
            Some(s) => s,
            None => return Vec::new(),
        };
        let mut state = lock(&slot.state);
        self.engine.expire(&mut state, at)
    }
}
