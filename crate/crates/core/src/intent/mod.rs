//! Intent recognition: utterance templates, slot catalogs and the
//! deterministic matcher that turns operator text into an intent with
//! filled and missing slots.

mod catalog;
mod corpus;
mod matcher;
mod normalize;
mod template;

pub use catalog::{resolve_catalog, Catalog, CatalogEntry, CompiledCatalog, Resolution};
pub use corpus::{Corpus, CorpusCase};
pub use matcher::{match_with, IntentMatch, IntentMatcher, MatchResult};
pub use normalize::normalize;
pub use template::{TemplateSyntaxError, TemplateToken, UtteranceTemplate};

use serde::{Deserialize, Serialize};

/// How a slot may be filled: from a named catalog or with any text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Catalog(String),
    FreeText,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub name: String,
    pub kind: SlotKind,
    #[serde(default = "default_required")]
    pub required: bool,
}

fn default_required() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentDef {
    pub id: String,
    pub utterances: Vec<UtteranceTemplate>,
    #[serde(default)]
    pub slots: Vec<SlotSpec>,
}

impl IntentDef {
    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn required_slots(&self) -> impl Iterator<Item = &SlotSpec> {
        self.slots.iter().filter(|s| s.required)
    }
}
