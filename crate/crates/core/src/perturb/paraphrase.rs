use regex::Regex;

use super::{derive, match_case, not_perturbable, PerturbationKind};
use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::text::Words;

/// A meaning-preserving rewriting engine.
pub trait ParaphraseProvider {
    fn name(&self) -> &str;

    /// `Ok(None)` when the engine has no rewrite for this hypothesis.
    fn paraphrase(&self, hypothesis: &str) -> std::result::Result<Option<String>, String>;
}

struct Rewrite {
    pattern: Regex,
    template: &'static str,
}

/// Clause reordering for a few copular shapes, then single-pass synonym
/// substitution.
pub struct RuleParaphraser {
    rewrites: Vec<Rewrite>,
    synonyms: Vec<(&'static str, &'static str)>,
}

const SYNONYMS: &[(&str, &str)] = &[
    ("wrote", "penned"),
    ("written", "authored"),
    ("big", "large"),
    ("huge", "enormous"),
    ("small", "little"),
    ("began", "started"),
    ("begins", "starts"),
    ("ended", "finished"),
    ("famous", "well-known"),
    ("popular", "widely liked"),
    ("located", "situated"),
    ("died", "passed away"),
    ("received", "got"),
    ("won", "earned"),
    ("created", "made"),
    ("founded", "established"),
    ("built", "constructed"),
    ("released", "put out"),
    ("published", "issued"),
    ("several", "multiple"),
    ("many", "numerous"),
    ("comic", "manga"),
    ("movie", "film"),
    ("job", "occupation"),
    ("country", "nation"),
    ("city", "town"),
    ("children", "kids"),
    ("married", "wed"),
    ("over", "more than"),
    ("under", "less than"),
    ("about", "roughly"),
    ("quickly", "rapidly"),
];

impl Default for RuleParaphraser {
    fn default() -> Self {
        let rewrite = |pattern: &str, template| Rewrite {
            pattern: Regex::new(pattern).expect("valid rewrite pattern"),
            template,
        };
        RuleParaphraser {
            rewrites: vec![
                // X became the <noun> Y  ->  Y is X <noun> version.
                rewrite(r"^(?P<x>.+?) became the (?P<n>[a-z]+) (?P<y>[^.]+?)\.?$", "${y} is ${x} ${n} version."),
                // The <n> of Y is X.  ->  X is the <n> of Y.
                rewrite(r"^The (?P<n>[a-z][a-z ]*?) of (?P<y>[^.]+?) (?P<v>is|was) (?P<x>[^.]+?)\.?$", "${x} ${v} the ${n} of ${y}."),
                // X is the <n> of Y.  ->  The <n> of Y is X.
                rewrite(r"^(?P<x>[^.]+?) (?P<v>is|was) the (?P<n>[a-z][a-z ]*?) of (?P<y>[^.]+?)\.?$", "The ${n} of ${y} ${v} ${x}."),
            ],
            synonyms: SYNONYMS.to_vec(),
        }
    }
}

impl RuleParaphraser {
    fn substitute_synonyms(&self, hypothesis: &str) -> Option<String> {
        let mut words = Words::parse(hypothesis);
        let mut hit = false;
        for word in &mut words.words {
            let lower = word.core.to_lowercase();
            if let Some((_, to)) = self.synonyms.iter().find(|(from, _)| *from == lower) {
                word.core = match_case(&word.core, to);
                hit = true;
            }
        }
        hit.then(|| words.render())
    }
}

impl ParaphraseProvider for RuleParaphraser {
    fn name(&self) -> &str {
        "rule-based"
    }

    fn paraphrase(&self, hypothesis: &str) -> std::result::Result<Option<String>, String> {
        let trimmed = hypothesis.trim();
        for rewrite in &self.rewrites {
            if rewrite.pattern.is_match(trimmed) {
                let out = rewrite.pattern.replace(trimmed, rewrite.template).into_owned();
                if out != trimmed {
                    return Ok(Some(out));
                }
            }
        }
        Ok(self.substitute_synonyms(hypothesis))
    }
}

/// Meaning-preserving rewrite through `engine`; the label is kept.
pub fn perturb_paraphrase(example: &Example, engine: &dyn ParaphraseProvider) -> Result<Example> {
    let rewritten = engine.paraphrase(&example.hypothesis).map_err(|message| Error::Provider {
        id: example.id.clone(),
        message,
    })?;
    match rewritten {
        Some(text) if text != example.hypothesis && !text.trim().is_empty() => {
            Ok(derive(example, PerturbationKind::Stan, text))
        }
        _ => Err(not_perturbable(
            example,
            PerturbationKind::Stan,
            format!("{} engine has no rewrite", engine.name()),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn ex(h: &str, label: Label) -> Example {
        Example::new("h3", "t", h, label)
    }

    #[test]
    fn detective_conan_reordering() {
        let out = perturb_paraphrase(
            &ex("'Case Closed' became the anime Detective Conan", Label::N),
            &RuleParaphraser::default(),
        )
        .unwrap();
        assert_eq!(out.hypothesis, "Detective Conan is 'Case Closed' anime version.");
        assert_eq!(out.label, Label::N);
    }

    #[test]
    fn copular_reordering_inverts() {
        let engine = RuleParaphraser::default();
        let once = engine.paraphrase("Paris is the capital of France.").unwrap().unwrap();
        assert_eq!(once, "The capital of France is Paris.");
        assert_eq!(engine.paraphrase(&once).unwrap().unwrap(), "Paris is the capital of France.");
    }

    #[test]
    fn synonyms_preserve_case() {
        let out = perturb_paraphrase(&ex("Famous authors wrote it.", Label::E), &RuleParaphraser::default()).unwrap();
        assert_eq!(out.hypothesis, "Well-known authors penned it.");
    }

    #[test]
    fn no_hit_rejected() {
        let err = perturb_paraphrase(&ex("Takahiro Arai sings.", Label::C), &RuleParaphraser::default()).unwrap_err();
        assert!(matches!(err, Error::NotPerturbable { .. }));
    }

    struct Failing;
    impl ParaphraseProvider for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn paraphrase(&self, _: &str) -> std::result::Result<Option<String>, String> {
            Err("model offline".into())
        }
    }

    #[test]
    fn provider_error_names_example() {
        match perturb_paraphrase(&ex("x is y", Label::E), &Failing).unwrap_err() {
            Error::Provider { id, message } => {
                assert_eq!(id, "h3");
                assert_eq!(message, "model offline");
            }
            other => panic!("{other}"),
        }
    }
}
