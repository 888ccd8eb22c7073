use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::normalize::normalize;

/// A named value set constraining what may fill a slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub name: String,
    pub entries: Vec<CatalogEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub canonical: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

/// Outcome of looking a phrase up in a catalog.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resolution {
    Unique(String),
    Ambiguous(BTreeSet<String>),
    NoEntry,
}

impl Catalog {
    pub fn new(name: &str, entries: &[(&str, &[&str])]) -> Self {
        Catalog {
            name: name.to_owned(),
            entries: entries
                .iter()
                .map(|(canonical, syns)| CatalogEntry {
                    canonical: (*canonical).to_owned(),
                    synonyms: syns.iter().map(|s| (*s).to_owned()).collect(),
                })
                .collect(),
        }
    }

    pub fn canonicals(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.canonical.as_str())
    }
}

/// Catalog with every surface form pre-tokenized.
#[derive(Clone, Debug)]
pub struct CompiledCatalog {
    pub name: String,
    entries: Vec<(String, Vec<Vec<String>>)>,
}

impl CompiledCatalog {
    pub fn compile(catalog: &Catalog) -> Self {
        let entries = catalog
            .entries
            .iter()
            .map(|e| {
                let mut forms = vec![normalize(&e.canonical)];
                forms.extend(e.synonyms.iter().map(|s| normalize(s)));
                forms.retain(|f| !f.is_empty());
                (e.canonical.clone(), forms)
            })
            .collect();
        CompiledCatalog {
            name: catalog.name.clone(),
            entries,
        }
    }

    /// Entries with some surface form containing `phrase` contiguously.
    pub fn resolve(&self, phrase: &[String]) -> Resolution {
        if phrase.is_empty() {
            return Resolution::NoEntry;
        }
        let hits: BTreeSet<String> = self
            .entries
            .iter()
            .filter(|(_, forms)| forms.iter().any(|f| contains_run(f, phrase)))
            .map(|(c, _)| c.clone())
            .collect();
        collapse(hits)
    }

    /// Entries with some surface form occurring contiguously inside `text`.
    /// Used for slot answers such as "I need the sun gear".
    pub fn find_within(&self, text: &[String]) -> Resolution {
        let hits: BTreeSet<String> = self
            .entries
            .iter()
            .filter(|(_, forms)| forms.iter().any(|f| contains_run(text, f)))
            .map(|(c, _)| c.clone())
            .collect();
        collapse(hits)
    }

    pub fn contains_canonical(&self, value: &str) -> bool {
        self.entries.iter().any(|(c, _)| c == value)
    }
}

fn collapse(mut hits: BTreeSet<String>) -> Resolution {
    match hits.len() {
        0 => Resolution::NoEntry,
        1 => Resolution::Unique(hits.pop_first().expect("one element")),
        _ => Resolution::Ambiguous(hits),
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Resolves `phrase` against `catalog` per the containment rule.
pub fn resolve_catalog(catalog: &Catalog, phrase: &[String]) -> Resolution {
    CompiledCatalog::compile(catalog).resolve(phrase)
}
