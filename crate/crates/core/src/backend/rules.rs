use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Something that happened in the cell, e.g. a robot action failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendEvent {
    pub kind: String,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    /// Target session; events without one go to the operator session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl BackendEvent {
    pub fn new(kind: &str) -> Self {
        BackendEvent {
            kind: kind.to_owned(),
            fields: BTreeMap::new(),
            session: None,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.fields.insert(key.to_owned(), value.into());
        self
    }
}

/// Maps an event pattern to a dialogue-API invocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRule {
    /// Event kind to match.
    pub on: String,
    /// Field equality predicate; all entries must match.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub when: BTreeMap<String, String>,
    pub dialogue: String,
    /// Values starting with `$` copy the named event field.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub payload: BTreeMap<String, String>,
}

impl EventRule {
    pub fn matches(&self, event: &BackendEvent) -> bool {
        self.on == event.kind && self.when.iter().all(|(k, v)| event.fields.get(k) == Some(v))
    }

    pub fn payload_for(&self, event: &BackendEvent) -> BTreeMap<String, String> {
        self.payload
            .iter()
            .map(|(k, v)| {
                let value = match v.strip_prefix('$') {
                    Some(field) => event.fields.get(field).cloned().unwrap_or_default(),
                    None => v.clone(),
                };
                (k.clone(), value)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(json: &str) -> EventRule {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn predicate_and_payload_mapping() {
        let r = rule(r#"{"on":"action_failed","when":{"reason":"dropped"},"dialogue":"assist_recovery","payload":{"item":"$item_label","n":"1"}}"#);
        let ev = BackendEvent::new("action_failed")
            .with("reason", "dropped")
            .with("item_label", "planet carrier");
        assert!(r.matches(&ev));
        assert_eq!(r.payload_for(&ev)["item"], "planet carrier");
        assert_eq!(r.payload_for(&ev)["n"], "1");
        assert!(!r.matches(&BackendEvent::new("action_failed").with("reason", "grasp_miss")));
        assert!(!r.matches(&BackendEvent::new("step_ready")));
    }
}
