use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matcher::{IntentMatcher, MatchResult};

/// One in-domain utterance and what it must match to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusCase {
    pub text: String,
    pub intent: String,
    #[serde(default)]
    pub slots: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub missing: BTreeSet<String>,
}

/// Labelled utterances for regression-testing a script's matcher.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub version: u32,
    pub positive: Vec<CorpusCase>,
    /// Out-of-domain utterances that must not match anything.
    pub negative: Vec<String>,
}

impl Corpus {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Describes every case the matcher gets wrong; empty when all pass.
    pub fn failures(&self, matcher: &IntentMatcher) -> Vec<String> {
        let mut out = Vec::new();
        for case in &self.positive {
            match matcher.match_text(&case.text) {
                MatchResult::Matched(m)
                    if m.intent == case.intent && m.filled == case.slots && m.missing_required == case.missing => {}
                other => out.push(format!("{:?}: expected {} {:?}, got {other:?}", case.text, case.intent, case.slots)),
            }
        }
        for text in &self.negative {
            if let MatchResult::Matched(m) = matcher.match_text(text) {
                out.push(format!("{text:?}: expected no match, got {}", m.intent));
            }
        }
        out
    }
}
