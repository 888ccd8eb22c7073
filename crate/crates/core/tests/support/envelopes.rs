use std::collections::BTreeMap;

use coassembly::backend::{ReplyContext, RequestContext, RequestEnvelope, RequestKind, ResponseEnvelope};
use coassembly::time::SimTime;
use proptest::prelude::*;

pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z ]{0,24}",
        "\\PC{0,16}",
        Just("quote \" and \\ backslash".to_owned()),
        Just("line\nbreak\ttab".to_owned()),
    ]
}

pub fn session() -> impl Strategy<Value = String> {
    "[a-z0-9][a-z0-9_-]{0,11}"
}

pub fn slots() -> impl Strategy<Value = BTreeMap<String, String>> {
    prop::collection::btree_map("[a-z_]{1,8}", text(), 0..3)
}

pub fn request() -> impl Strategy<Value = RequestEnvelope> {
    let kind = prop_oneof![
        Just(RequestKind::Utterance),
        Just(RequestKind::SlotAnswer),
        Just(RequestKind::Control),
    ];
    let context = (
        prop::option::of(prop_oneof![Just("baseline".to_owned()), Just("conversational".to_owned())]),
        prop::option::of((0u64..10_000_000).prop_map(SimTime::from_millis)),
    )
        .prop_map(|(mode, sim_time)| RequestContext { mode, sim_time });
    let reply = prop::option::of(("[a-z_]{1,12}", slots()).prop_map(|(dialogue, slots)| ReplyContext { dialogue, slots }));
    (session(), kind, text(), context, prop::option::of("[a-z_]{1,12}"), slots(), reply).prop_map(
        |(session, kind, text, context, intent, slots, reply_to)| RequestEnvelope {
            version: 1,
            session,
            kind,
            text,
            context,
            intent,
            slots,
            reply_to,
        },
    )
}

pub fn response() -> impl Strategy<Value = ResponseEnvelope> {
    (session(), "[A-Z][A-Za-z .,]{0,29}", prop::option::of("[a-z_]{1,12}"), any::<bool>(), "[0-9a-f]{12}").prop_map(
        |(session, speech, follow_up, end, state_digest)| ResponseEnvelope {
            version: 1,
            session,
            speech,
            follow_up,
            end,
            state_digest,
        },
    )
}

/// Bodies that must be rejected as bad envelopes, by name.
pub const MALFORMED: &[(&str, &str)] = &[
    ("version two", r#"{"version":2,"session":"s1","kind":"utterance","text":"x"}"#),
    ("version zero", r#"{"version":0,"session":"s1","kind":"utterance","text":"x"}"#),
    ("empty session", r#"{"version":1,"session":"","kind":"utterance","text":"x"}"#),
    ("blank session", r#"{"version":1,"session":"   ","kind":"utterance","text":"x"}"#),
    ("missing session", r#"{"version":1,"kind":"utterance","text":"x"}"#),
    ("missing text", r#"{"version":1,"session":"s1","kind":"utterance"}"#),
    ("missing kind", r#"{"version":1,"session":"s1","text":"x"}"#),
    ("unknown kind", r#"{"version":1,"session":"s1","kind":"shout","text":"x"}"#),
    ("snake case kind", r#"{"version":1,"session":"s1","kind":"slot_answer","text":"x"}"#),
    ("unknown field", r#"{"version":1,"session":"s1","kind":"utterance","text":"x","volume":3}"#),
    ("string version", r#"{"version":"1","session":"s1","kind":"utterance","text":"x"}"#),
    ("numeric text", r#"{"version":1,"session":"s1","kind":"utterance","text":5}"#),
    ("unknown context field", r#"{"version":1,"session":"s1","kind":"utterance","text":"x","context":{"speed":2}}"#),
    ("negative sim time", r#"{"version":1,"session":"s1","kind":"utterance","text":"x","context":{"sim_time":-1}}"#),
    ("reply without dialogue", r#"{"version":1,"session":"s1","kind":"utterance","text":"x","reply_to":{}}"#),
    ("array body", r#"[1,"s1","utterance","x"]"#),
    ("empty body", ""),
    ("truncated", r#"{"version":1,"session":"s1","#),
    ("null", "null"),
];
