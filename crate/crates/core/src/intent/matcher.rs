use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::catalog::{CompiledCatalog, Resolution};
use super::normalize::{normalize, strip_articles};
use super::template::TemplateToken;
use super::{IntentDef, SlotKind, SlotSpec};

/// Result of matching one utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatchResult {
    Matched(IntentMatch),
    NoMatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntentMatch {
    pub intent: String,
    pub filled: BTreeMap<String, String>,
    pub missing_required: BTreeSet<String>,
    pub literal_score: usize,
}

impl MatchResult {
    pub fn intent(&self) -> Option<&str> {
        match self {
            MatchResult::Matched(m) => Some(&m.intent),
            MatchResult::NoMatch => None,
        }
    }
}

struct CompiledTemplate {
    intent: usize,
    order: usize,
    tokens: Vec<TemplateToken>,
    literals: usize,
    holes: usize,
}

struct CompiledIntent {
    id: String,
    slots: Vec<SlotSpec>,
}

/// Deterministic template matcher. Immutable once built.
pub struct IntentMatcher {
    intents: Vec<CompiledIntent>,
    templates: Vec<CompiledTemplate>,
    catalogs: BTreeMap<String, CompiledCatalog>,
}

impl IntentMatcher {
    /// Builds a matcher. Inputs are assumed validated; slots naming an unknown
    /// catalog simply never resolve.
    pub fn new(intents: &[IntentDef], catalogs: &[super::Catalog]) -> Self {
        let catalogs = catalogs
            .iter()
            .map(|c| (c.name.clone(), CompiledCatalog::compile(c)))
            .collect();
        let mut compiled = Vec::new();
        let mut templates = Vec::new();
        for (i, intent) in intents.iter().enumerate() {
            compiled.push(CompiledIntent {
                id: intent.id.clone(),
                slots: intent.slots.clone(),
            });
            for (order, t) in intent.utterances.iter().enumerate() {
                templates.push(CompiledTemplate {
                    intent: i,
                    order,
                    tokens: t.tokens.clone(),
                    literals: t.literal_count(),
                    holes: t.holes().count(),
                });
            }
        }
        IntentMatcher {
            intents: compiled,
            templates,
            catalogs,
        }
    }

    pub fn catalog(&self, name: &str) -> Option<&CompiledCatalog> {
        self.catalogs.get(name)
    }

    pub fn match_text(&self, text: &str) -> MatchResult {
        self.match_tokens(&normalize(text))
    }

    pub fn match_tokens(&self, tokens: &[String]) -> MatchResult {
        let mut best: Option<(&CompiledTemplate, BTreeMap<String, String>)> = None;
        for tpl in &self.templates {
            let Some(filled) = self.best_alignment(tpl, tokens) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((cur, _)) => self.rank(tpl, cur) == Ordering::Less,
            };
            if better {
                best = Some((tpl, filled));
            }
        }
        let Some((tpl, filled)) = best else {
            return MatchResult::NoMatch;
        };
        let intent = &self.intents[tpl.intent];
        let missing_required = intent
            .slots
            .iter()
            .filter(|s| s.required && !filled.contains_key(&s.name))
            .map(|s| s.name.clone())
            .collect();
        MatchResult::Matched(IntentMatch {
            intent: intent.id.clone(),
            filled,
            missing_required,
            literal_score: tpl.literals,
        })
    }

    /// Total order: more literals, then fewer holes, then intent id, then
    /// template declaration order.
    fn rank(&self, a: &CompiledTemplate, b: &CompiledTemplate) -> Ordering {
        b.literals
            .cmp(&a.literals)
            .then(a.holes.cmp(&b.holes))
            .then_with(|| self.intents[a.intent].id.cmp(&self.intents[b.intent].id))
            .then(a.order.cmp(&b.order))
    }

    /// Tries every alignment of `tpl` over the full input and keeps the one
    /// resolving the most slots (first found on ties, holes shortest-first).
    fn best_alignment(&self, tpl: &CompiledTemplate, tokens: &[String]) -> Option<BTreeMap<String, String>> {
        let mut alignments = Vec::new();
        let mut spans = Vec::new();
        align(&tpl.tokens, tokens, 0, 0, &mut spans, &mut alignments);
        let intent = &self.intents[tpl.intent];
        let mut best: Option<(usize, BTreeMap<String, String>)> = None;
        for spans in alignments {
            let mut filled = BTreeMap::new();
            for (slot, (start, end)) in spans {
                if let Some(value) = self.fill(intent, &slot, &tokens[start..end]) {
                    filled.insert(slot, value);
                }
            }
            if best.as_ref().map_or(true, |(n, _)| filled.len() > *n) {
                best = Some((filled.len(), filled));
            }
        }
        best.map(|(_, f)| f)
    }

    fn fill(&self, intent: &CompiledIntent, slot: &str, span: &[String]) -> Option<String> {
        let spec = intent.slots.iter().find(|s| s.name == slot)?;
        match &spec.kind {
            SlotKind::FreeText => Some(span.join(" ")),
            SlotKind::Catalog(name) => match self.catalogs.get(name)?.resolve(strip_articles(span)) {
                Resolution::Unique(v) => Some(v),
                Resolution::Ambiguous(_) | Resolution::NoEntry => None,
            },
        }
    }

    /// Resolves a bare answer to a pending slot prompt.
    pub fn resolve_slot_answer(&self, intent: &str, slot: &str, text: &str) -> Option<String> {
        let intent = self.intents.iter().find(|i| i.id == intent)?;
        let spec = intent.slots.iter().find(|s| s.name == slot)?;
        let tokens = normalize(text);
        match &spec.kind {
            SlotKind::FreeText => (!tokens.is_empty()).then(|| tokens.join(" ")),
            SlotKind::Catalog(name) => {
                let catalog = self.catalogs.get(name)?;
                match catalog.resolve(strip_articles(&tokens)) {
                    Resolution::Unique(v) => Some(v),
                    Resolution::Ambiguous(_) => None,
                    Resolution::NoEntry => match catalog.find_within(&tokens) {
                        Resolution::Unique(v) => Some(v),
                        _ => None,
                    },
                }
            }
        }
    }
}

type Span = (usize, usize);

/// Enumerates alignments of template tokens onto the whole input. Each hole
/// absorbs a non-empty run ending right before the next literal.
fn align(
    tpl: &[TemplateToken],
    input: &[String],
    ti: usize,
    ii: usize,
    spans: &mut Vec<(String, Span)>,
    out: &mut Vec<Vec<(String, Span)>>,
) {
    if ti == tpl.len() {
        if ii == input.len() {
            out.push(spans.clone());
        }
        return;
    }
    match &tpl[ti] {
        TemplateToken::Literal(l) => {
            if input.get(ii) == Some(l) {
                align(tpl, input, ti + 1, ii + 1, spans, out);
            }
        }
        TemplateToken::SlotHole(name) => match tpl.get(ti + 1) {
            None => {
                if ii < input.len() {
                    spans.push((name.clone(), (ii, input.len())));
                    align(tpl, input, ti + 1, input.len(), spans, out);
                    spans.pop();
                }
            }
            Some(TemplateToken::Literal(next)) => {
                for end in ii + 1..input.len() {
                    if &input[end] == next {
                        spans.push((name.clone(), (ii, end)));
                        align(tpl, input, ti + 1, end, spans, out);
                        spans.pop();
                    }
                }
            }
            // Adjacent holes are rejected by validation; try every split anyway.
            Some(TemplateToken::SlotHole(_)) => {
                for end in ii + 1..input.len() {
                    spans.push((name.clone(), (ii, end)));
                    align(tpl, input, ti + 1, end, spans, out);
                    spans.pop();
                }
            }
        },
    }
}

/// Convenience for one-off matching against ad hoc intents.
pub fn match_with(intents: &[IntentDef], catalogs: &[super::Catalog], text: &str) -> MatchResult {
    IntentMatcher::new(intents, catalogs).match_text(text)
}
