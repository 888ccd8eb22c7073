use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::normalize::normalize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TemplateToken {
    Literal(String),
    SlotHole(String),
}

/// An example phrase with slot holes, written as `"give me the {tool}"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UtteranceTemplate {
    pub tokens: Vec<TemplateToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed template {template:?}: {reason}")]
pub struct TemplateSyntaxError {
    pub template: String,
    pub reason: &'static str,
}

impl UtteranceTemplate {
    pub fn literal_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| matches!(t, TemplateToken::Literal(_)))
            .count()
    }

    pub fn holes(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            TemplateToken::SlotHole(s) => Some(s.as_str()),
            TemplateToken::Literal(_) => None,
        })
    }

    pub fn has_adjacent_holes(&self) -> bool {
        self.tokens.windows(2).any(|w| {
            matches!(w[0], TemplateToken::SlotHole(_)) && matches!(w[1], TemplateToken::SlotHole(_))
        })
    }

    /// Substitutes slot values, producing a phrase the template should match.
    pub fn render(&self, values: &dyn Fn(&str) -> Option<String>) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Literal(l) => l.clone(),
                TemplateToken::SlotHole(s) => values(s).unwrap_or_else(|| format!("{{{s}}}")),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl FromStr for UtteranceTemplate {
    type Err = TemplateSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| TemplateSyntaxError {
            template: s.to_owned(),
            reason,
        };
        let mut tokens = Vec::new();
        for piece in s.split_whitespace() {
            if let Some(inner) = piece.strip_prefix('{') {
                let (name, rest) = inner.split_once('}').ok_or_else(|| err("unterminated slot hole"))?;
                if name.is_empty() || name.contains('{') || rest.contains(['{', '}']) {
                    return Err(err("bad slot name"));
                }
                // Trailing punctuation such as "{tool}," is dropped like elsewhere.
                if !normalize(rest).is_empty() {
                    return Err(err("slot hole must be a whole word"));
                }
                tokens.push(TemplateToken::SlotHole(name.to_owned()));
            } else if piece.contains(['{', '}']) {
                return Err(err("slot hole must be a whole word"));
            } else {
                tokens.extend(normalize(piece).into_iter().map(TemplateToken::Literal));
            }
        }
        Ok(UtteranceTemplate { tokens })
    }
}

impl TryFrom<String> for UtteranceTemplate {
    type Error = TemplateSyntaxError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<UtteranceTemplate> for String {
    fn from(t: UtteranceTemplate) -> String {
        t.to_string()
    }
}

impl fmt::Display for UtteranceTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|_| None))
    }
}
