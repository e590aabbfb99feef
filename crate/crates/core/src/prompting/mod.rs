//! Prompt construction for the five strategies: zero-shot, few-shot CoT,
//! single-perturbation prompts (SEMP) and the two all-perturbation variants
//! (MESP with more instructions, MPI, or more exemplars, MPE).
//!
//! Section texts live in `assets/prompts` and can be overridden from a
//! directory. Every prompt follows the section order task, awareness,
//! limitation, answering, demonstrations.

mod exemplars;
mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use exemplars::{select_exemplars, spread, Exemplar, ExemplarPool, Source};
pub use templates::{AwarenessForm, LimitationForm, TemplateSet};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::perturb::PerturbationKind;
use crate::seed::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PromptStrategy {
    OpZs,
    OpCot,
    Semp(PerturbationKind),
    MespMpi,
    MespMpe,
}

impl PromptStrategy {
    pub fn all() -> Vec<PromptStrategy> {
        let mut all = vec![PromptStrategy::OpZs, PromptStrategy::OpCot];
        all.extend(PerturbationKind::CANONICAL.iter().map(|&k| PromptStrategy::Semp(k)));
        all.extend([PromptStrategy::MespMpi, PromptStrategy::MespMpe]);
        all
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptStrategy::OpZs => f.write_str("op_zs"),
            PromptStrategy::OpCot => f.write_str("op_cot"),
            PromptStrategy::Semp(k) => write!(f, "semp:{}", k.name()),
            PromptStrategy::MespMpi => f.write_str("mesp_mpi"),
            PromptStrategy::MespMpe => f.write_str("mesp_mpe"),
        }
    }
}

impl FromStr for PromptStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lowered = s.trim().to_ascii_lowercase().replace('-', "_");
        if let Some(kind) = lowered.strip_prefix("semp:").or_else(|| lowered.strip_prefix("semp_")) {
            return Ok(PromptStrategy::Semp(kind.parse()?));
        }
        match lowered.as_str() {
            "op_zs" | "zs" => Ok(PromptStrategy::OpZs),
            "op_cot" | "cot" => Ok(PromptStrategy::OpCot),
            "mesp_mpi" | "mpi" => Ok(PromptStrategy::MespMpi),
            "mesp_mpe" | "mpe" => Ok(PromptStrategy::MespMpe),
            _ => Err(Error::invalid("strategy", format!("unknown strategy `{s}`"))),
        }
    }
}

impl TryFrom<String> for PromptStrategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PromptStrategy> for String {
    fn from(s: PromptStrategy) -> String {
        s.to_string()
    }
}

/// Where the instruction sections go in the chat transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Task, awareness and limitation form the system message.
    System,
    /// Every section goes into one leading user message.
    User,
}

/// The verdict words a model is asked to answer with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStyle {
    /// Yes / No / Neutral.
    YesNoNeutral,
    /// yes / no / it is not possible to tell.
    YesNoTell,
}

impl VerdictStyle {
    pub fn word(self, label: Label) -> &'static str {
        match (self, label) {
            (VerdictStyle::YesNoNeutral, Label::E) => "Yes",
            (VerdictStyle::YesNoNeutral, Label::C) => "No",
            (VerdictStyle::YesNoNeutral, Label::N) => "Neutral",
            (VerdictStyle::YesNoTell, Label::E) => "yes",
            (VerdictStyle::YesNoTell, Label::C) => "no",
            (VerdictStyle::YesNoTell, Label::N) => "it is not possible to tell",
        }
    }

    fn options(self) -> String {
        match self {
            VerdictStyle::YesNoNeutral => "Yes or No or Neutral".to_string(),
            VerdictStyle::YesNoTell => Label::ALL.iter().map(|&l| format!("\"{}\"", self.word(l))).collect::<Vec<_>>().join(" or "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelProfile {
    pub name: String,
    pub placement: Placement,
    pub verdicts: VerdictStyle,
    pub cot_demos: usize,
    pub semp_perturbed_demos: usize,
    pub semp_original_demos: usize,
    pub mpi_demos: usize,
    pub mpe_demos: usize,
}

impl Default for ModelProfile {
    fn default() -> Self {
        ModelProfile::gpt()
    }
}

impl ModelProfile {
    pub fn gpt() -> Self {
        ModelProfile {
            name: "gpt".into(),
            placement: Placement::User,
            verdicts: VerdictStyle::YesNoNeutral,
            cot_demos: 6,
            semp_perturbed_demos: 3,
            semp_original_demos: 3,
            mpi_demos: 10,
            mpe_demos: 15,
        }
    }

    pub fn llama() -> Self {
        ModelProfile {
            name: "llama".into(),
            placement: Placement::System,
            verdicts: VerdictStyle::YesNoTell,
            mpi_demos: 8,
            mpe_demos: 11,
            ..ModelProfile::gpt()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gpt" | "generic" => Ok(ModelProfile::gpt()),
            "llama" => Ok(ModelProfile::llama()),
            other => Err(Error::invalid("model profile", format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionName {
    Task,
    Awareness,
    Limitation,
    Answering,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: SectionName,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub source: Source,
    pub premise: String,
    pub hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    pub answer: String,
}

impl Demonstration {
    pub fn user_turn(&self) -> String {
        query_turn(&self.premise, &self.hypothesis)
    }

    pub fn assistant_turn(&self) -> String {
        match &self.explanation {
            Some(e) => format!("E: {e}\nA: {}", self.answer),
            None => format!("A: {}", self.answer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub strategy: PromptStrategy,
    pub profile: ModelProfile,
    pub sections: Vec<Section>,
    pub demonstrations: Vec<Demonstration>,
    pub template_hash: String,
}

impl PromptSpec {
    pub fn section(&self, name: SectionName) -> Option<&str> {
        self.sections.iter().find(|s| s.name == name).map(|s| s.text.as_str())
    }

    /// Stable digest of the whole spec, used in cache keys.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("prompt spec serializes"))
    }

    pub fn estimated_tokens(&self) -> usize {
        let sections: usize = self.sections.iter().map(|s| estimate_tokens(&s.text)).sum();
        let demos: usize = self
            .demonstrations
            .iter()
            .map(|d| estimate_tokens(&d.user_turn()) + estimate_tokens(&d.assistant_turn()))
            .sum();
        sections + demos
    }
}

/// Whitespace token count scaled by 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    (text.split_whitespace().count() * 13).div_ceil(10)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.into(),
            content: content.into(),
        }
    }
}

pub fn query_turn(premise: &str, hypothesis: &str) -> String {
    format!("Premise: {premise}\nHypothesis: {hypothesis}")
}

/// Assembles the sections and demonstrations for `strategy`.
pub fn build_prompt(
    strategy: PromptStrategy,
    templates: &TemplateSet,
    pools: &ExemplarPool,
    profile: &ModelProfile,
    seed: u64,
) -> Result<PromptSpec> {
    let style = profile.verdicts;
    let mut sections = vec![Section {
        name: SectionName::Task,
        text: templates.task(style == VerdictStyle::YesNoTell).to_string(),
    }];
    let awareness = |kinds: &[PerturbationKind], form| {
        kinds.iter().map(|&k| templates.awareness(k, form)).collect::<Vec<_>>().join("\n\n")
    };
    let (aware, limitation, explained) = match strategy {
        PromptStrategy::OpZs => (None, LimitationForm::Brief, false),
        PromptStrategy::OpCot => (None, LimitationForm::Extended, true),
        PromptStrategy::Semp(k) => (Some(awareness(&[k], AwarenessForm::Long)), LimitationForm::Strict, true),
        PromptStrategy::MespMpi => (
            Some(awareness(&PerturbationKind::CANONICAL, AwarenessForm::Long)),
            LimitationForm::Strict,
            true,
        ),
        PromptStrategy::MespMpe => (
            Some(awareness(&PerturbationKind::CANONICAL, AwarenessForm::Short)),
            LimitationForm::Strict,
            true,
        ),
    };
    if let Some(text) = aware {
        sections.push(Section {
            name: SectionName::Awareness,
            text,
        });
    }
    sections.push(Section {
        name: SectionName::Limitation,
        text: templates.limitation(limitation).to_string(),
    });
    sections.push(Section {
        name: SectionName::Answering,
        text: templates.answering(explained, &style.options()),
    });

    let (counts, coverage) = match strategy {
        PromptStrategy::OpZs => (Default::default(), false),
        PromptStrategy::OpCot => ([(Source::Original, profile.cot_demos)].into(), false),
        PromptStrategy::Semp(k) => (
            [
                (Source::Original, profile.semp_original_demos),
                (Source::Perturbed(k), profile.semp_perturbed_demos),
            ]
            .into(),
            false,
        ),
        PromptStrategy::MespMpi => (spread(profile.mpi_demos, &Source::ROTATION), true),
        PromptStrategy::MespMpe => (spread(profile.mpe_demos, &Source::ROTATION), true),
    };
    let chosen = select_exemplars(pools, &counts, true, coverage, seed)?;
    let demonstrations = chosen
        .into_iter()
        .map(|ex| {
            if explained && ex.explanation.is_none() {
                return Err(Error::invalid("exemplar", format!("`{}` has no explanation", ex.id)));
            }
            Ok(Demonstration {
                source: ex.source,
                premise: ex.premise,
                hypothesis: ex.hypothesis,
                explanation: if explained { ex.explanation } else { None },
                answer: style.word(ex.label).to_string(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(PromptSpec {
        strategy,
        profile: profile.clone(),
        sections,
        demonstrations,
        template_hash: templates.hash(),
    })
}

/// Lays the prompt out as chat turns ending in the query.
pub fn render_chat_request(spec: &PromptSpec, premise: &str, hypothesis: &str) -> Vec<ChatMessage> {
    let text_of = |names: &[SectionName]| {
        spec.sections
            .iter()
            .filter(|s| names.contains(&s.name))
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    let query = query_turn(premise, hypothesis);
    let demos = spec
        .demonstrations
        .iter()
        .flat_map(|d| [ChatMessage::new("user", d.user_turn()), ChatMessage::new("assistant", d.assistant_turn())]);
    let mut messages = Vec::new();
    let preamble = match spec.profile.placement {
        Placement::System => {
            messages.push(ChatMessage::new(
                "system",
                text_of(&[SectionName::Task, SectionName::Awareness, SectionName::Limitation]),
            ));
            text_of(&[SectionName::Answering])
        }
        Placement::User => text_of(&[
            SectionName::Task,
            SectionName::Awareness,
            SectionName::Limitation,
            SectionName::Answering,
        ]),
    };
    if spec.demonstrations.is_empty() {
        messages.push(ChatMessage::new("user", format!("{preamble}\n\n{query}")));
    } else {
        messages.push(ChatMessage::new("user", preamble));
        messages.extend(demos);
        messages.push(ChatMessage::new("user", query));
    }
    messages
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> ExemplarPool {
        let mut all = Vec::new();
        for source in Source::ROTATION {
            for label in Label::ALL {
                for i in 0..5 {
                    all.push(Exemplar {
                        id: format!("{source}-{label}-{i}"),
                        source,
                        premise: "The region of WIMA is Worldwide.".into(),
                        hypothesis: format!("{source} hypothesis {i}"),
                        label,
                        explanation: Some("The premise says so.".into()),
                    });
                }
            }
        }
        ExemplarPool::new(all)
    }

    fn build(strategy: PromptStrategy, profile: &ModelProfile) -> PromptSpec {
        build_prompt(strategy, &TemplateSet::builtin(), &pool(), profile, 5).unwrap()
    }

    #[test]
    fn zero_shot_shape() {
        let spec = build(PromptStrategy::OpZs, &ModelProfile::gpt());
        assert_eq!(spec.sections.len(), 3);
        assert!(spec.demonstrations.is_empty());
        assert!(spec.section(SectionName::Answering).unwrap().contains("Answer only with one word: Yes or No or Neutral"));
        let msgs = render_chat_request(&build(PromptStrategy::OpZs, &ModelProfile::llama()), "P", "H");
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, "system");
        assert!(msgs[1].content.ends_with("Premise: P\nHypothesis: H"));
    }

    #[test]
    fn cot_message_count() {
        let spec = build(PromptStrategy::OpCot, &ModelProfile::llama());
        assert_eq!(spec.demonstrations.len(), 6);
        assert!(spec.demonstrations.iter().all(|d| d.source == Source::Original));
        let msgs = render_chat_request(&spec, "P", "H");
        assert_eq!(msgs.len(), 2 + 12 + 1);
        assert!(msgs[3].content.starts_with("E: The premise says so.\nA: "));
    }

    #[test]
    fn semp_uses_one_kind() {
        let spec = build(PromptStrategy::Semp(PerturbationKind::Char), &ModelProfile::gpt());
        assert_eq!(spec.demonstrations.len(), 6);
        let perturbed = spec.demonstrations.iter().filter(|d| d.source == Source::Perturbed(PerturbationKind::Char)).count();
        assert_eq!(perturbed, 3);
        let aware = spec.section(SectionName::Awareness).unwrap();
        assert_eq!(aware, TemplateSet::builtin().awareness(PerturbationKind::Char, AwarenessForm::Long));
    }

    #[test]
    fn mesp_trade_off() {
        for profile in [ModelProfile::gpt(), ModelProfile::llama()] {
            let mpi = build(PromptStrategy::MespMpi, &profile);
            let mpe = build(PromptStrategy::MespMpe, &profile);
            assert!(mpe.demonstrations.len() > mpi.demonstrations.len());
            let len = |s: &PromptSpec| s.section(SectionName::Awareness).unwrap().len();
            assert!(len(&mpe) < len(&mpi));
            for kind in PerturbationKind::CANONICAL {
                assert!(mpi.demonstrations.iter().any(|d| d.source == Source::Perturbed(kind)));
            }
        }
        assert_eq!(build(PromptStrategy::MespMpi, &ModelProfile::gpt()).demonstrations.len(), 10);
        assert_eq!(build(PromptStrategy::MespMpe, &ModelProfile::llama()).demonstrations.len(), 11);
    }

    #[test]
    fn section_order_is_fixed() {
        for strategy in PromptStrategy::all() {
            let spec = build(strategy, &ModelProfile::gpt());
            let names: Vec<SectionName> = spec.sections.iter().map(|s| s.name).collect();
            let mut sorted = names.clone();
            sorted.sort();
            assert_eq!(names, sorted);
        }
    }

    #[test]
    fn deterministic_and_hashable() {
        let a = build(PromptStrategy::MespMpe, &ModelProfile::gpt());
        let b = build(PromptStrategy::MespMpe, &ModelProfile::gpt());
        assert_eq!(a.hash(), b.hash());
        let back: PromptSpec = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in PromptStrategy::all() {
            assert_eq!(s.to_string().parse::<PromptStrategy>().unwrap(), s);
        }
        assert!("semp:bogus".parse::<PromptStrategy>().is_err());
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens("one two three"), 4);
        assert_eq!(estimate_tokens(""), 0);
    }
}
