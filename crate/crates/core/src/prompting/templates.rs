use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::perturb::PerturbationKind;
use crate::seed::sha256_hex;

macro_rules! asset {
    ($name:literal) => {
        ($name, include_str!(concat!("../../assets/prompts/", $name)))
    };
}

const BUILTIN: &[(&str, &str)] = &[
    asset!("task_yes_no_tell.txt"),
    asset!("task_yes_no_neutral.txt"),
    asset!("limitation_brief.txt"),
    asset!("limitation_extended.txt"),
    asset!("limitation_strict.txt"),
    asset!("answering_one_word.txt"),
    asset!("answering_explained.txt"),
    asset!("awareness_long_char.txt"),
    asset!("awareness_long_neg.txt"),
    asset!("awareness_long_num.txt"),
    asset!("awareness_long_loc.txt"),
    asset!("awareness_long_stan.txt"),
    asset!("awareness_short_char.txt"),
    asset!("awareness_short_neg.txt"),
    asset!("awareness_short_num.txt"),
    asset!("awareness_short_loc.txt"),
    asset!("awareness_short_stan.txt"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwarenessForm {
    Long,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitationForm {
    Brief,
    Extended,
    Strict,
}

/// The section texts, keyed by asset file name. Loaded once and then read-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    texts: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet {
            texts: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Builtin texts overridden by any same-named `.txt` files in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut set = TemplateSet::builtin();
        for (name, _) in BUILTIN {
            let path = dir.join(name);
            if path.is_file() {
                set.texts.insert(name.to_string(), fs::read_to_string(&path)?);
            }
        }
        Ok(set)
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(k, _)| *k)
    }

    fn text(&self, name: &str) -> &str {
        self.texts.get(name).map(|s| s.trim_end()).unwrap_or_default()
    }

    pub fn task(&self, tell_style: bool) -> &str {
        self.text(if tell_style { "task_yes_no_tell.txt" } else { "task_yes_no_neutral.txt" })
    }

    pub fn awareness(&self, kind: PerturbationKind, form: AwarenessForm) -> &str {
        let form = match form {
            AwarenessForm::Long => "long",
            AwarenessForm::Short => "short",
        };
        let kind = match kind {
            PerturbationKind::WordSwap => "char",
            other => other.name(),
        };
        self.text(&format!("awareness_{form}_{kind}.txt"))
    }

    pub fn limitation(&self, form: LimitationForm) -> &str {
        self.text(match form {
            LimitationForm::Brief => "limitation_brief.txt",
            LimitationForm::Extended => "limitation_extended.txt",
            LimitationForm::Strict => "limitation_strict.txt",
        })
    }

    /// Answering instructions with `{options}` filled in.
    pub fn answering(&self, explained: bool, options: &str) -> String {
        let name = if explained { "answering_explained.txt" } else { "answering_one_word.txt" };
        self.text(name).replace("{options}", options)
    }

    /// Digest over every text, so cached responses go stale when a template changes.
    pub fn hash(&self) -> String {
        let mut buf = Vec::new();
        for (k, v) in &self.texts {
            buf.extend_from_slice(k.as_bytes());
            buf.push(0);
            buf.extend_from_slice(v.as_bytes());
            buf.push(0);
        }
        sha256_hex(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_is_non_empty() {
        let t = TemplateSet::builtin();
        for name in TemplateSet::names() {
            assert!(!t.text(name).is_empty(), "{name}");
        }
    }

    #[test]
    fn short_awareness_is_shorter() {
        let t = TemplateSet::builtin();
        let total = |form| PerturbationKind::CANONICAL.iter().map(|&k| t.awareness(k, form).len()).sum::<usize>();
        assert!(total(AwarenessForm::Short) < total(AwarenessForm::Long));
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("limitation_brief.txt"), "Only the premise.\n").unwrap();
        let t = TemplateSet::from_dir(dir.path()).unwrap();
        assert_eq!(t.limitation(LimitationForm::Brief), "Only the premise.");
        assert_ne!(t.hash(), TemplateSet::builtin().hash());
        assert_eq!(t.task(true), TemplateSet::builtin().task(true));
    }
}
