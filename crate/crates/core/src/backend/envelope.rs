use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

pub const PROTOCOL_VERSION: u32 = 1;

/// Communication mode a service or scenario runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Conversational,
    Baseline,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Baseline, Mode::Conversational];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Conversational => "conversational",
            Mode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conversational" => Ok(Mode::Conversational),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestKind {
    Utterance,
    SlotAnswer,
    Control,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_time: Option<SimTime>,
}

/// Which robot-initiated dialogue a user turn answers, with its payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplyContext {
    pub dialogue: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
}

/// Front-end to back-end request. Front-ends send `version`, `session`,
/// `kind`, `text` and optionally `context`; the dialogue engine additionally
/// fills `intent`, `slots` and `reply_to` when it dispatches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestEnvelope {
    pub version: u32,
    pub session: String,
    pub kind: RequestKind,
    pub text: String,
    #[serde(default)]
    pub context: RequestContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<ReplyContext>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseEnvelope {
    pub version: u32,
    pub session: String,
    #[serde(default)]
    pub speech: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_up: Option<String>,
    #[serde(default)]
    pub end: bool,
    #[serde(default)]
    pub state_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("bad envelope: {0}")]
    BadEnvelope(String),
}

/// Envelopes are JSON objects; serde would otherwise accept array bodies.
fn parse_object<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ProtocolError> {
    let bad = |e: serde_json::Error| ProtocolError::BadEnvelope(e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
    if !value.is_object() {
        return Err(ProtocolError::BadEnvelope("body must be a JSON object".into()));
    }
    serde_json::from_value(value).map_err(bad)
}

impl RequestEnvelope {
    pub fn utterance(session: &str, text: &str) -> Self {
        RequestEnvelope {
            version: PROTOCOL_VERSION,
            session: session.to_owned(),
            kind: RequestKind::Utterance,
            text: text.to_owned(),
            context: RequestContext::default(),
            intent: None,
            slots: BTreeMap::new(),
            reply_to: None,
        }
    }

    pub fn control(session: &str, text: &str) -> Self {
        RequestEnvelope {
            kind: RequestKind::Control,
            ..Self::utterance(session, text)
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.context.mode = Some(mode.as_str().to_owned());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let env: RequestEnvelope = parse_object(text)?;
        env.validate()?;
        Ok(env)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.version != PROTOCOL_VERSION {
            return Err(ProtocolError::BadEnvelope(format!("unsupported version {}", self.version)));
        }
        if self.session.trim().is_empty() {
            return Err(ProtocolError::BadEnvelope("empty session".into()));
        }
        Ok(())
    }
}

impl ResponseEnvelope {
    pub fn say(session: &str, speech: impl Into<String>) -> Self {
        ResponseEnvelope {
            version: PROTOCOL_VERSION,
            session: session.to_owned(),
            speech: speech.into(),
            follow_up: None,
            end: true,
            state_digest: String::new(),
        }
    }

    pub fn open(mut self) -> Self {
        self.end = false;
        self
    }

    pub fn with_follow_up(mut self, dialogue: &str) -> Self {
        self.follow_up = Some(dialogue.to_owned());
        self.end = false;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        parse_object(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    /// Structural checks; follow-up resolution is checked by the dialogue engine.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.version != PROTOCOL_VERSION {
            return Err(ProtocolError::BadEnvelope(format!("unsupported version {}", self.version)));
        }
        if self.session.trim().is_empty() {
            return Err(ProtocolError::BadEnvelope("empty session".into()));
        }
        if self.speech.trim().is_empty() {
            return Err(ProtocolError::BadEnvelope("missing speech".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_front_end_request() {
        let env = RequestEnvelope::from_json(
            r#"{"version":1,"session":"s1","kind":"utterance","text":"give me the screwdriver"}"#,
        )
        .unwrap();
        assert_eq!(env, RequestEnvelope::utterance("s1", "give me the screwdriver"));
    }

    #[test]
    fn kinds_are_kebab_case() {
        let mut env = RequestEnvelope::utterance("s", "x");
        env.kind = RequestKind::SlotAnswer;
        assert!(env.to_json().contains(r#""kind":"slot-answer""#));
    }

    #[test]
    fn version_two_rejected() {
        let err = RequestEnvelope::from_json(r#"{"version":2,"session":"s1","kind":"utterance","text":"x"}"#);
        assert!(matches!(err, Err(ProtocolError::BadEnvelope(_))));
    }

    #[test]
    fn response_missing_speech_fails_validation() {
        let r = ResponseEnvelope::from_json(r#"{"version":1,"session":"s1","end":true}"#).unwrap();
        assert!(r.validate().is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("baseline".parse::<Mode>(), Ok(Mode::Baseline));
        assert!("turbo".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::Conversational).unwrap(), "\"conversational\"");
    }
}
