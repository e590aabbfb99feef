use super::{derive, match_case, not_perturbable, PerturbationKind};
use crate::corpus::Example;
use crate::error::Result;
use crate::text::Words;

/// (positive auxiliary, contracted negation).
const AUXILIARIES: &[(&str, &str)] = &[
    ("is", "isn't"),
    ("was", "wasn't"),
    ("are", "aren't"),
    ("were", "weren't"),
    ("has", "hasn't"),
    ("have", "haven't"),
    ("had", "hadn't"),
    ("does", "doesn't"),
    ("do", "don't"),
    ("did", "didn't"),
    ("can", "can't"),
    ("will", "won't"),
    ("could", "couldn't"),
    ("would", "wouldn't"),
    ("should", "shouldn't"),
];

enum Site {
    /// `is` -> `isn't`
    Insert(usize, &'static str),
    /// `isn't` -> `is`
    Contracted(usize, &'static str),
    /// `is not` -> `is`; holds the index of `not`.
    Separate(usize),
}

fn find_site(words: &Words) -> Option<Site> {
    for (i, word) in words.words.iter().enumerate() {
        let lower = word.core.to_lowercase().replace('\u{2019}', "'");
        if lower == "cannot" {
            return Some(Site::Contracted(i, "can"));
        }
        if let Some(&(pos, _)) = AUXILIARIES.iter().find(|(_, neg)| *neg == lower) {
            return Some(Site::Contracted(i, pos));
        }
        if let Some(&(_, neg)) = AUXILIARIES.iter().find(|(pos, _)| *pos == lower) {
            let next_is_not = words
                .words
                .get(i + 1)
                .is_some_and(|w| w.lead.is_empty() && w.core.eq_ignore_ascii_case("not"));
            // Punctuation right after the auxiliary ("is," / "is.") means it is not a clause head.
            if next_is_not && word.trail.is_empty() {
                return Some(Site::Separate(i + 1));
            }
            if word.trail.is_empty() || words.words.get(i + 1).is_none() {
                return Some(Site::Insert(i, neg));
            }
        }
    }
    None
}

/// Toggles negation at the first auxiliary/copula. Inserting and removing are
/// inverses, so applying twice restores the hypothesis.
pub fn perturb_negation(example: &Example) -> Result<Example> {
    let mut words = Words::parse(&example.hypothesis);
    let site = find_site(&words)
        .ok_or_else(|| not_perturbable(example, PerturbationKind::Neg, "no negatable auxiliary or copula"))?;
    match site {
        Site::Insert(i, neg) | Site::Contracted(i, neg) => {
            let word = &mut words.words[i];
            word.core = match_case(&word.core, neg);
        }
        Site::Separate(not_at) => words.remove(not_at),
    }
    Ok(derive(example, PerturbationKind::Neg, words.render()))
}
