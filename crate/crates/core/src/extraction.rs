//! Verdict extraction from free-form model output.
//!
//! Pipeline: strip emoji and invisible characters, look for the last answer
//! marker and classify the text after it; when there is no marker (or the
//! tail says nothing classifiable) classify the whole cleaned text. Phrase
//! classes are tried neutral first, then negative, then affirmative, so a
//! neutral phrase such as "it is not possible to tell" is never read as "no".

use std::fs;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

const DEFAULT_LEXICON: &str = include_str!("../assets/lexicon.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconSpec {
    pub affirmative: Vec<String>,
    pub negative: Vec<String>,
    pub neutral: Vec<String>,
    pub marker: String,
}

/// Compiled phrase lists.
#[derive(Debug, Clone)]
pub struct Lexicon {
    spec: LexiconSpec,
    /// In precedence order: neutral, negative, affirmative.
    rules: Vec<(Label, Regex)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_json(DEFAULT_LEXICON).expect("builtin lexicon is valid")
    }
}

impl Lexicon {
    pub fn new(spec: LexiconSpec) -> Result<Self> {
        if spec.marker.is_empty() {
            return Err(Error::invalid("lexicon", "empty marker"));
        }
        let mut rules = Vec::new();
        for (label, phrases) in [(Label::N, &spec.neutral), (Label::C, &spec.negative), (Label::E, &spec.affirmative)] {
            let mut phrases: Vec<&String> = phrases.iter().filter(|p| !p.trim().is_empty()).collect();
            if phrases.is_empty() {
                return Err(Error::invalid("lexicon", format!("no phrases for {label}")));
            }
            // Longest first so the reported match is the most specific phrase.
            phrases.sort_by_key(|p| std::cmp::Reverse(p.len()));
            let alternation: Vec<String> = phrases.iter().map(|p| regex::escape(p.trim())).collect();
            let re = RegexBuilder::new(&format!(r"\b(?:{})\b", alternation.join("|")))
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::invalid("lexicon", e.to_string()))?;
            rules.push((label, re));
        }
        Ok(Lexicon { spec, rules })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Lexicon::new(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Lexicon::from_json(&fs::read_to_string(path)?)
    }

    pub fn spec(&self) -> &LexiconSpec {
        &self.spec
    }

    fn classify(&self, text: &str) -> Option<(Label, String)> {
        self.rules
            .iter()
            .find_map(|(label, re)| re.find(text).map(|m| (*label, m.as_str().to_string())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// `None` when nothing classifiable was found.
    pub label: Option<Label>,
    pub matched_phrase: Option<String>,
    pub marker_found: bool,
}

impl Verdict {
    pub fn is_unparseable(&self) -> bool {
        self.label.is_none()
    }
}

fn is_invisible_or_emoji(c: char) -> bool {
    matches!(c as u32,
        0x200B..=0x200F
        | 0x2060..=0x2064
        | 0xFEFF
        | 0xFE00..=0xFE0F
        | 0x20E3
        | 0x2600..=0x27BF
        | 0x2B00..=0x2BFF
        | 0x1F000..=0x1FAFF
        | 0xE0000..=0xE007F)
}

/// Removes emoji, variation selectors and zero-width characters.
pub fn clean(text: &str) -> String {
    text.chars().filter(|&c| !is_invisible_or_emoji(c)).collect()
}

/// Byte offset just past the last marker that is not glued to a preceding word.
fn after_last_marker(text: &str, marker: &str) -> Option<usize> {
    text.rmatch_indices(marker)
        .find(|(at, _)| !text[..*at].chars().next_back().is_some_and(char::is_alphanumeric))
        .map(|(at, m)| at + m.len())
}

pub fn extract_answer(raw: &str, lexicon: &Lexicon) -> Verdict {
    let text = clean(raw);
    let marker = after_last_marker(&text, &lexicon.spec.marker);
    let found = marker
        .and_then(|start| lexicon.classify(&text[start..]))
        .or_else(|| lexicon.classify(&text));
    Verdict {
        label: found.as_ref().map(|(l, _)| *l),
        matched_phrase: found.map(|(_, p)| p),
        marker_found: marker.is_some(),
    }
}

/// Maps a bare verdict word ("Yes", "NEUTRAL", "it is not possible to tell")
/// to its label; anything else is `None`.
pub fn normalize_verdict(word: &str, lexicon: &Lexicon) -> Option<Label> {
    let word = word.trim().trim_end_matches(['.', '!']).trim().to_lowercase();
    let spec = &lexicon.spec;
    [(Label::N, &spec.neutral), (Label::C, &spec.negative), (Label::E, &spec.affirmative)]
        .into_iter()
        .find(|(_, phrases)| phrases.iter().any(|p| p.to_lowercase() == word))
        .map(|(l, _)| l)
}
