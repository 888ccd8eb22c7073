//! Turn-taking dialogue engine.
//!
//! A conversation starts either with a user turn matched to an intent
//! (`Trigger::UserIntent`) or with a robot turn opened through a dialogue API
//! (`Trigger::ApiCall`). The engine drives slot prompts, dispatches complete
//! requests to the back-end and opens follow-up dialogues.

mod engine;
mod session;

pub use engine::{DialogueEngine, DialogueError, TurnOutcome, CLARIFY_LINE, GIVE_UP_LINE, RETRY_EXHAUSTED_LINE};
pub use session::{AwaitingInput, SessionState, SessionStatus, Speaker, Turn};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    UserIntent(String),
    ApiCall(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueDef {
    pub id: String,
    pub trigger: Trigger,
    /// Robot line; `{slot}` placeholders are filled from the dialogue's slots.
    pub reply_template: String,
    #[serde(default)]
    pub dispatch: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_up: Option<String>,
    #[serde(default)]
    pub slot_prompts: BTreeMap<String, String>,
    #[serde(default = "default_retries")]
    pub max_slot_retries: u8,
    /// For robot-opened dialogues: whether the robot line asks the user
    /// something and the conversation stays open for the answer.
    #[serde(default)]
    pub expect_reply: bool,
}

fn default_retries() -> u8 {
    2
}

/// Replaces `{name}` placeholders with values; unknown placeholders stay.
pub fn render(template: &str, values: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                match values.get(key) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_known_placeholders() {
        let v = BTreeMap::from([("item".to_string(), "planet carrier".to_string())]);
        assert_eq!(
            render("I dropped the {item}. Could you place it on the fixture?", &v),
            "I dropped the planet carrier. Could you place it on the fixture?"
        );
        assert_eq!(render("{x} and {item}", &v), "{x} and planet carrier");
        assert_eq!(render("open {brace", &v), "open {brace");
    }
}
