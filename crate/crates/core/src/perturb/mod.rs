//! Rule-based hypothesis perturbations with explicit label policies, and
//! challenge-set assembly.
//!
//! | kind      | code | default label map        |
//! |-----------|------|--------------------------|
//! | char      | C    | preserve                 |
//! | neg       | N    | E->C, C->E, N->N         |
//! | num       | M    | E->C, C->C, N->N         |
//! | loc       | L    | E->C, C->C, N->N         |
//! | stan      | S    | preserve                 |
//! | word-swap | W    | preserve                 |

mod challenge;
mod char_typo;
mod location;
mod negation;
mod numeric;
mod paraphrase;
mod word_swap;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use challenge::{build_challenge_set, ChallengeManifest, ChallengeOptions, ChallengeSet, ChallengeSizes};
pub use char_typo::perturb_char;
pub use location::{perturb_location, DEFAULT_GAZETTEER};
pub use negation::perturb_negation;
pub use numeric::{perturb_numeric, NUMBER_WORDS};
pub use paraphrase::{perturb_paraphrase, ParaphraseProvider, RuleParaphraser};
pub use word_swap::{perturb_word_swap, swap_score};

use crate::corpus::{Example, Label};
use crate::error::{Error, Result};
use crate::seed::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PerturbationKind {
    #[serde(rename = "C")]
    Char,
    #[serde(rename = "N")]
    Neg,
    #[serde(rename = "M")]
    Num,
    #[serde(rename = "L")]
    Loc,
    #[serde(rename = "S")]
    Stan,
    /// Out-of-distribution word-order swap.
    #[serde(rename = "W")]
    WordSwap,
}

impl PerturbationKind {
    /// The five in-distribution kinds in canonical order.
    pub const CANONICAL: [PerturbationKind; 5] = [
        PerturbationKind::Char,
        PerturbationKind::Neg,
        PerturbationKind::Num,
        PerturbationKind::Loc,
        PerturbationKind::Stan,
    ];

    pub fn code(self) -> char {
        match self {
            PerturbationKind::Char => 'C',
            PerturbationKind::Neg => 'N',
            PerturbationKind::Num => 'M',
            PerturbationKind::Loc => 'L',
            PerturbationKind::Stan => 'S',
            PerturbationKind::WordSwap => 'W',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::Char => "char",
            PerturbationKind::Neg => "neg",
            PerturbationKind::Num => "num",
            PerturbationKind::Loc => "loc",
            PerturbationKind::Stan => "stan",
            PerturbationKind::WordSwap => "word-swap",
        }
    }

    pub fn from_code(code: char) -> Option<Self> {
        match code.to_ascii_uppercase() {
            'C' => Some(PerturbationKind::Char),
            'N' => Some(PerturbationKind::Neg),
            'M' => Some(PerturbationKind::Num),
            'L' => Some(PerturbationKind::Loc),
            'S' => Some(PerturbationKind::Stan),
            'W' => Some(PerturbationKind::WordSwap),
            _ => None,
        }
    }

    pub fn default_policy(self) -> LabelPolicy {
        match self {
            PerturbationKind::Char | PerturbationKind::Stan | PerturbationKind::WordSwap => LabelPolicy::PRESERVE,
            PerturbationKind::Neg => LabelPolicy {
                on_entail: Label::C,
                on_contradict: Label::E,
                on_neutral: Label::N,
            },
            PerturbationKind::Num | PerturbationKind::Loc => LabelPolicy {
                on_entail: Label::C,
                on_contradict: Label::C,
                on_neutral: Label::N,
            },
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lowered = s.trim().to_ascii_lowercase();
        let kind = match lowered.as_str() {
            "char" | "character" => Some(PerturbationKind::Char),
            "neg" | "negation" => Some(PerturbationKind::Neg),
            "num" | "numeric" => Some(PerturbationKind::Num),
            "loc" | "location" => Some(PerturbationKind::Loc),
            "stan" | "paraphrase" => Some(PerturbationKind::Stan),
            "word-swap" | "wordswap" | "word_swap" | "swap" => Some(PerturbationKind::WordSwap),
            _ if lowered.chars().count() == 1 => PerturbationKind::from_code(lowered.chars().next().unwrap()),
            _ => None,
        };
        kind.ok_or_else(|| Error::invalid("perturbation kind", format!("unknown kind `{s}`")))
    }
}

/// Gold-label map applied by a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPolicy {
    pub on_entail: Label,
    pub on_contradict: Label,
    pub on_neutral: Label,
}

impl LabelPolicy {
    pub const PRESERVE: LabelPolicy = LabelPolicy {
        on_entail: Label::E,
        on_contradict: Label::C,
        on_neutral: Label::N,
    };

    pub fn apply(&self, label: Label) -> Label {
        match label {
            Label::E => self.on_entail,
            Label::C => self.on_contradict,
            Label::N => self.on_neutral,
        }
    }
}

/// Tunables for the built-in generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Upper bound on the number of words that receive a typo.
    pub char_budget: usize,
    pub gazetteer: Vec<String>,
    /// Per-kind overrides of the default label policies.
    pub policies: BTreeMap<PerturbationKind, LabelPolicy>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            char_budget: 2,
            gazetteer: DEFAULT_GAZETTEER.iter().map(|s| s.to_string()).collect(),
            policies: BTreeMap::new(),
        }
    }
}

impl GeneratorConfig {
    pub fn policy(&self, kind: PerturbationKind) -> LabelPolicy {
        self.policies.get(&kind).copied().unwrap_or_else(|| kind.default_policy())
    }

    /// Digest of the canonical JSON form, recorded in challenge manifests.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// The built-in generators plus a pluggable paraphrase engine.
pub struct Generators {
    pub config: GeneratorConfig,
    pub paraphraser: Box<dyn ParaphraseProvider + Send + Sync>,
}

impl Default for Generators {
    fn default() -> Self {
        Generators::new(GeneratorConfig::default())
    }
}

impl Generators {
    pub fn new(config: GeneratorConfig) -> Self {
        Generators {
            config,
            paraphraser: Box::new(RuleParaphraser::default()),
        }
    }

    pub fn apply(&self, example: &Example, kind: PerturbationKind, seed: u64) -> Result<Example> {
        let mut out = match kind {
            PerturbationKind::Char => perturb_char(example, self.config.char_budget, seed)?,
            PerturbationKind::Neg => perturb_negation(example)?,
            PerturbationKind::Num => perturb_numeric(example, seed)?,
            PerturbationKind::Loc => perturb_location(example, &self.config.gazetteer, seed)?,
            PerturbationKind::Stan => perturb_paraphrase(example, self.paraphraser.as_ref())?,
            PerturbationKind::WordSwap => perturb_word_swap(example, seed)?,
        };
        if self.config.policies.contains_key(&kind) {
            out.label = self.config.policy(kind).apply(example.label);
        }
        Ok(out)
    }
}

/// Builds the perturbed copy of `source` with the default label policy.
pub(crate) fn derive(source: &Example, kind: PerturbationKind, hypothesis: String) -> Example {
    Example {
        id: format!("{}~{}", source.id, kind.code()),
        table_id: source.table_id.clone(),
        hypothesis,
        label: kind.default_policy().apply(source.label),
        perturbation: Some(kind),
        parent_id: Some(source.id.clone()),
    }
}

pub(crate) fn not_perturbable(source: &Example, kind: PerturbationKind, reason: impl Into<String>) -> Error {
    Error::NotPerturbable {
        id: source.id.clone(),
        kind,
        reason: reason.into(),
    }
}

/// Copies the capitalization of the first letter of `model` onto `word`.
pub(crate) fn match_case(model: &str, word: &str) -> String {
    let upper = model.chars().next().is_some_and(char::is_uppercase);
    let mut chars = word.chars();
    match chars.next() {
        Some(first) if upper => first.to_uppercase().chain(chars).collect(),
        Some(first) => first.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}
