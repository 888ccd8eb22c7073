//! Skill back-end: the JSON wire protocol, the session registry and the
//! event rules that turn robot and simulation events into robot-initiated
//! dialogues.

mod envelope;
mod rules;
mod service;

pub use envelope::{
    Mode, ProtocolError, ReplyContext, RequestContext, RequestEnvelope, RequestKind, ResponseEnvelope,
    PROTOCOL_VERSION,
};
pub use rules::{BackendEvent, EventRule};
pub use service::{digest, Backend, BackendError, Exchange, Fulfiller, Invocation, DEFAULT_GREETING, EVENT_SESSION};
