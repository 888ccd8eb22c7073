//! Conversation scripts: the declarative bundle of catalogs, intents,
//! dialogues and event rules, loaded from a version-tagged JSON document.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::EventRule;
use crate::dialogue::{DialogueDef, Trigger};
use crate::intent::{Catalog, IntentDef, IntentMatcher, MatchResult, SlotKind};

pub const SCRIPT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationScript {
    pub version: u32,
    #[serde(default)]
    pub greeting: Option<String>,
    #[serde(default)]
    pub catalogs: Vec<Catalog>,
    pub intents: Vec<IntentDef>,
    pub dialogues: Vec<DialogueDef>,
    #[serde(default)]
    pub event_rules: Vec<EventRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("unsupported script version {0}")]
    UnsupportedVersion(u32),
    #[error("duplicate catalog {0:?}")]
    DuplicateCatalog(String),
    #[error("catalog {catalog:?} has an empty canonical value")]
    EmptyCanonical { catalog: String },
    #[error("catalog {catalog:?} repeats canonical value {value:?}")]
    DuplicateCanonical { catalog: String, value: String },
    #[error("catalog {catalog:?} entry {value:?} has an empty synonym")]
    EmptySynonym { catalog: String, value: String },
    #[error("duplicate intent {0:?}")]
    DuplicateIntent(String),
    #[error("intent {0:?} has no utterances")]
    NoUtterances(String),
    #[error("intent {intent:?} declares slot {slot:?} twice")]
    DuplicateSlot { intent: String, slot: String },
    #[error("intent {intent:?} slot {slot:?} references unknown catalog {catalog:?}")]
    UnknownCatalog { intent: String, slot: String, catalog: String },
    #[error("intent {intent:?} template {template:?} uses undeclared slot {slot:?}")]
    UnknownTemplateSlot { intent: String, template: String, slot: String },
    #[error("intent {intent:?} template {template:?} has no literal token")]
    NoLiteral { intent: String, template: String },
    #[error("intent {intent:?} template {template:?} has adjacent slot holes")]
    AdjacentHoles { intent: String, template: String },
    #[error("duplicate dialogue {0:?}")]
    DuplicateDialogue(String),
    #[error("dialogue {dialogue:?} is triggered by unknown intent {intent:?}")]
    UnknownTriggerIntent { dialogue: String, intent: String },
    #[error("intent {0:?} has more than one dialogue")]
    DuplicateIntentDialogue(String),
    #[error("intent {0:?} has no dialogue")]
    MissingIntentDialogue(String),
    #[error("dialogue {dialogue:?} follows up with unknown dialogue {follow_up:?}")]
    UnknownFollowUp { dialogue: String, follow_up: String },
    #[error("follow-up chain through {0:?} is cyclic")]
    FollowUpCycle(String),
    #[error("dialogue {dialogue:?} has no prompt for required slot {slot:?}")]
    MissingSlotPrompt { dialogue: String, slot: String },
    #[error("dialogue {0:?} must allow at least one slot retry cycle")]
    ZeroRetries(String),
    #[error("dialogue {0:?} is opened by an API call and cannot dispatch")]
    ApiDialogueDispatch(String),
    #[error("event rule {index} targets unknown dialogue {dialogue:?}")]
    UnknownRuleDialogue { index: usize, dialogue: String },
    #[error("event rule {index} targets dialogue {dialogue:?} which is not API-triggered")]
    RuleNotApiCall { index: usize, dialogue: String },
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

impl ConversationScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| LoadError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn intent(&self, id: &str) -> Option<&IntentDef> {
        self.intents.iter().find(|i| i.id == id)
    }

    pub fn dialogue(&self, id: &str) -> Option<&DialogueDef> {
        self.dialogues.iter().find(|d| d.id == id)
    }

    pub fn has_api_dialogues(&self) -> bool {
        self.dialogues.iter().any(|d| matches!(d.trigger, Trigger::ApiCall(_)))
    }

    /// Largest number of slots declared by a single intent.
    pub fn max_intent_slots(&self) -> usize {
        self.intents.iter().map(|i| i.slots.len()).max().unwrap_or(0)
    }

    /// Checks every structural invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), Vec<ScriptError>> {
        let mut errs = Vec::new();
        if self.version != SCRIPT_VERSION {
            errs.push(ScriptError::UnsupportedVersion(self.version));
        }
        self.validate_catalogs(&mut errs);
        self.validate_intents(&mut errs);
        self.validate_dialogues(&mut errs);
        for (index, rule) in self.event_rules.iter().enumerate() {
            match self.dialogue(&rule.dialogue) {
                None => errs.push(ScriptError::UnknownRuleDialogue {
                    index,
                    dialogue: rule.dialogue.clone(),
                }),
                Some(d) if !matches!(d.trigger, Trigger::ApiCall(_)) => errs.push(ScriptError::RuleNotApiCall {
                    index,
                    dialogue: rule.dialogue.clone(),
                }),
                Some(_) => {}
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn validate_catalogs(&self, errs: &mut Vec<ScriptError>) {
        let mut names = BTreeSet::new();
        for c in &self.catalogs {
            if !names.insert(&c.name) {
                errs.push(ScriptError::DuplicateCatalog(c.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for e in &c.entries {
                if e.canonical.trim().is_empty() {
                    errs.push(ScriptError::EmptyCanonical { catalog: c.name.clone() });
                } else if !seen.insert(&e.canonical) {
                    errs.push(ScriptError::DuplicateCanonical {
                        catalog: c.name.clone(),
                        value: e.canonical.clone(),
                    });
                }
                if e.synonyms.iter().any(|s| s.trim().is_empty()) {
                    errs.push(ScriptError::EmptySynonym {
                        catalog: c.name.clone(),
                        value: e.canonical.clone(),
                    });
                }
            }
        }
    }

    fn validate_intents(&self, errs: &mut Vec<ScriptError>) {
        let catalogs: BTreeSet<&str> = self.catalogs.iter().map(|c| c.name.as_str()).collect();
        let mut ids = BTreeSet::new();
        for intent in &self.intents {
            if !ids.insert(&intent.id) {
                errs.push(ScriptError::DuplicateIntent(intent.id.clone()));
            }
            if intent.utterances.is_empty() {
                errs.push(ScriptError::NoUtterances(intent.id.clone()));
            }
            let mut slot_names = BTreeSet::new();
            for slot in &intent.slots {
                if !slot_names.insert(slot.name.as_str()) {
                    errs.push(ScriptError::DuplicateSlot {
                        intent: intent.id.clone(),
                        slot: slot.name.clone(),
                    });
                }
                if let SlotKind::Catalog(c) = &slot.kind {
                    if !catalogs.contains(c.as_str()) {
                        errs.push(ScriptError::UnknownCatalog {
                            intent: intent.id.clone(),
                            slot: slot.name.clone(),
                            catalog: c.clone(),
                        });
                    }
                }
            }
            for t in &intent.utterances {
                let template = t.to_string();
                if t.literal_count() == 0 {
                    errs.push(ScriptError::NoLiteral {
                        intent: intent.id.clone(),
                        template: template.clone(),
                    });
                }
                if t.has_adjacent_holes() {
                    errs.push(ScriptError::AdjacentHoles {
                        intent: intent.id.clone(),
                        template: template.clone(),
                    });
                }
                for hole in t.holes() {
                    if !slot_names.contains(hole) {
                        errs.push(ScriptError::UnknownTemplateSlot {
                            intent: intent.id.clone(),
                            template: template.clone(),
                            slot: hole.to_owned(),
                        });
                    }
                }
            }
        }
    }

    fn validate_dialogues(&self, errs: &mut Vec<ScriptError>) {
        let mut ids = BTreeSet::new();
        let mut per_intent: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &self.dialogues {
            if !ids.insert(d.id.as_str()) {
                errs.push(ScriptError::DuplicateDialogue(d.id.clone()));
            }
            if d.max_slot_retries == 0 {
                errs.push(ScriptError::ZeroRetries(d.id.clone()));
            }
            if let Some(f) = &d.follow_up {
                if self.dialogue(f).is_none() {
                    errs.push(ScriptError::UnknownFollowUp {
                        dialogue: d.id.clone(),
                        follow_up: f.clone(),
                    });
                }
            }
            match &d.trigger {
                Trigger::UserIntent(intent_id) => {
                    *per_intent.entry(intent_id).or_default() += 1;
                    match self.intent(intent_id) {
                        None => errs.push(ScriptError::UnknownTriggerIntent {
                            dialogue: d.id.clone(),
                            intent: intent_id.clone(),
                        }),
                        Some(intent) => {
                            for slot in intent.required_slots() {
                                if !d.slot_prompts.contains_key(&slot.name) {
                                    errs.push(ScriptError::MissingSlotPrompt {
                                        dialogue: d.id.clone(),
                                        slot: slot.name.clone(),
                                    });
                                }
                            }
                        }
                    }
                }
                Trigger::ApiCall(_) => {
                    if d.dispatch {
                        errs.push(ScriptError::ApiDialogueDispatch(d.id.clone()));
                    }
                }
            }
        }
        for intent in &self.intents {
            match per_intent.get(intent.id.as_str()).copied().unwrap_or(0) {
                0 => errs.push(ScriptError::MissingIntentDialogue(intent.id.clone())),
                1 => {}
                _ => errs.push(ScriptError::DuplicateIntentDialogue(intent.id.clone())),
            }
        }
        // Follow-up chains: each node has at most one successor, so walking
        // from every start and revisiting a node means a cycle.
        let mut reported = BTreeSet::new();
        for start in &self.dialogues {
            let mut seen = BTreeSet::new();
            let mut cur = Some(start);
            while let Some(d) = cur {
                if !seen.insert(d.id.as_str()) {
                    if reported.insert(d.id.clone()) {
                        errs.push(ScriptError::FollowUpCycle(d.id.clone()));
                    }
                    break;
                }
                cur = d.follow_up.as_deref().and_then(|f| self.dialogue(f));
            }
        }
    }
}

/// A validated script with its matcher built. Cheap to share via `Arc`.
pub struct CompiledScript {
    script: ConversationScript,
    matcher: IntentMatcher,
}

impl CompiledScript {
    pub fn compile(script: ConversationScript) -> Result<Arc<Self>, Vec<ScriptError>> {
        script.validate()?;
        let matcher = IntentMatcher::new(&script.intents, &script.catalogs);
        Ok(Arc::new(CompiledScript { script, matcher }))
    }

    pub fn script(&self) -> &ConversationScript {
        &self.script
    }

    pub fn matcher(&self) -> &IntentMatcher {
        &self.matcher
    }

    pub fn dialogue(&self, id: &str) -> Option<&DialogueDef> {
        self.script.dialogue(id)
    }

    pub fn intent(&self, id: &str) -> Option<&IntentDef> {
        self.script.intent(id)
    }

    pub fn dialogue_for_intent(&self, intent: &str) -> Option<&DialogueDef> {
        self.script
            .dialogues
            .iter()
            .find(|d| matches!(&d.trigger, Trigger::UserIntent(i) if i == intent))
    }
}

/// Matches operator text against a compiled script.
pub fn match_utterance(script: &CompiledScript, text: &str) -> MatchResult {
    script.matcher.match_text(text)
}
