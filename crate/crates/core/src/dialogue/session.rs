use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::backend::ReplyContext;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Robot,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub at: SimTime,
    /// Dialogue the turn belongs to; `None` for turns outside any dialogue.
    pub dialogue: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingUser,
    AwaitingBackend,
    Idle,
    Terminal,
}

/// What the session is waiting to hear from the user, if anything specific.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AwaitingInput {
    Slot(String),
    Reply(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ActiveDialogue {
    pub dialogue: String,
    pub intent: Option<String>,
    pub slots: BTreeMap<String, String>,
    pub reply_to: Option<ReplyContext>,
    /// Robot-opened dialogue waiting for the user's answer.
    pub awaiting_reply: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct PendingSlot {
    pub slot: String,
    pub prompts: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct QueuedInitiation {
    pub dialogue: String,
    pub payload: BTreeMap<String, String>,
}

/// Live state of one conversation partner. Owned by a single caller at a time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionState {
    id: String,
    pub(crate) active: Option<ActiveDialogue>,
    pub(crate) pending_slot: Option<PendingSlot>,
    pub(crate) queued: VecDeque<QueuedInitiation>,
    pub(crate) turn_log: Vec<Turn>,
    pub(crate) status: SessionStatus,
    pub(crate) no_match_streak: u8,
    pub(crate) last_user_text: String,
    pub(crate) answered_slot: bool,
}

impl SessionState {
    pub fn new(id: impl Into<String>) -> Self {
        SessionState {
            id: id.into(),
            active: None,
            pending_slot: None,
            queued: VecDeque::new(),
            turn_log: Vec::new(),
            status: SessionStatus::Idle,
            no_match_streak: 0,
            last_user_text: String::new(),
            answered_slot: false,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn turn_log(&self) -> &[Turn] {
        &self.turn_log
    }

    pub fn active_dialogue(&self) -> Option<&str> {
        self.active.as_ref().map(|a| a.dialogue.as_str())
    }

    pub fn pending_slot(&self) -> Option<(&str, u8)> {
        self.pending_slot.as_ref().map(|p| (p.slot.as_str(), p.prompts))
    }

    pub fn queued_initiations(&self) -> Vec<&str> {
        self.queued.iter().map(|q| q.dialogue.as_str()).collect()
    }

    pub fn awaiting(&self) -> Option<AwaitingInput> {
        if self.status != SessionStatus::AwaitingUser {
            return None;
        }
        if let Some(p) = &self.pending_slot {
            return Some(AwaitingInput::Slot(p.slot.clone()));
        }
        match &self.active {
            Some(a) if a.awaiting_reply => Some(AwaitingInput::Reply(a.dialogue.clone())),
            _ => None,
        }
    }

    /// Lets a host start a fresh conversation on a session whose previous
    /// conversation ended with the end flag set.
    pub fn reopen(&mut self) {
        if self.status == SessionStatus::Terminal {
            self.status = SessionStatus::Idle;
        }
    }

    /// Drops the current conversation without any robot turn.
    pub(crate) fn abort(&mut self, terminal: bool) {
        self.active = None;
        self.pending_slot = None;
        self.no_match_streak = 0;
        self.status = if terminal {
            SessionStatus::Terminal
        } else {
            SessionStatus::Idle
        };
    }

    pub(crate) fn log(&mut self, speaker: Speaker, text: &str, at: SimTime) {
        let dialogue = self.active.as_ref().map(|a| a.dialogue.clone());
        self.turn_log.push(Turn {
            speaker,
            text: text.to_owned(),
            at,
            dialogue,
        });
    }
}
