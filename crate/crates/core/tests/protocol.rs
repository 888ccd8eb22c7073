mod support;

use coassembly::backend::{Mode, ProtocolError, RequestEnvelope, ResponseEnvelope};
use coassembly::time::SimTime;
use proptest::prelude::*;

use support::envelopes::{request, response, MALFORMED};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn request_round_trips(env in request()) {
        let json = env.to_json();
        prop_assert_eq!(RequestEnvelope::from_json(&json).unwrap(), env);
    }

    #[test]
    fn response_round_trips(env in response()) {
        let json = env.to_json();
        let back = ResponseEnvelope::from_json(&json).unwrap();
        prop_assert!(back.validate().is_ok());
        prop_assert_eq!(back, env);
    }
}

#[test]
fn malformed_requests_are_rejected() {
    assert!(MALFORMED.len() >= 10);
    for (name, body) in MALFORMED {
        match RequestEnvelope::from_json(body) {
            Err(ProtocolError::BadEnvelope(_)) => {}
            other => panic!("{name}: expected BadEnvelope, got {other:?}"),
        }
    }
}

#[test]
fn field_names_are_stable() {
    let mut env = RequestEnvelope::utterance("s1", "hi").with_mode(Mode::Baseline);
    env.context.sim_time = Some(SimTime::from_millis(2500));
    assert_eq!(
        env.to_json(),
        r#"{"version":1,"session":"s1","kind":"utterance","text":"hi","context":{"mode":"baseline","sim_time":2.5}}"#
    );
    let resp = ResponseEnvelope::say("s1", "Next.").with_follow_up("confirm_next_step");
    assert_eq!(
        resp.to_json(),
        r#"{"version":1,"session":"s1","speech":"Next.","follow_up":"confirm_next_step","end":false,"state_digest":""}"#
    );
}
