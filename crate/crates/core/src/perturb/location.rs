use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive, not_perturbable, PerturbationKind};
use crate::corpus::Example;
use crate::error::Result;

pub const DEFAULT_GAZETTEER: &[&str] = &[
    "Africa", "America", "Argentina", "Asia", "Australia", "Austria", "Beijing", "Belgium", "Berlin", "Brazil",
    "California", "Canada", "Chicago", "Chile", "China", "Denmark", "Egypt", "England", "Europe", "Finland",
    "France", "Gambia", "Germany", "Greece", "Hong Kong", "India", "Indonesia", "Ireland", "Israel", "Italy",
    "Japan", "Kenya", "London", "Los Angeles", "Madrid", "Mexico", "Moscow", "Netherlands", "New York",
    "New Zealand", "Nigeria", "Norway", "Paris", "Peru", "Poland", "Portugal", "Rome", "Russia", "Scotland",
    "Seoul", "Singapore", "South Africa", "South Korea", "Spain", "Sweden", "Switzerland", "Sydney", "Texas",
    "Tokyo", "Toronto", "Turkey", "UK", "United Kingdom", "United States", "US", "USA", "Vietnam", "Wales",
];

fn is_boundary(text: &str, at: usize) -> bool {
    let before = text[..at].chars().next_back();
    !before.is_some_and(char::is_alphanumeric)
}

/// Non-overlapping gazetteer matches as `(start, end)`, longest first at each
/// position.
fn matches(text: &str, gazetteer: &[String]) -> Vec<(usize, usize)> {
    let mut found: Vec<(usize, usize)> = Vec::new();
    for entry in gazetteer.iter().filter(|e| !e.is_empty()) {
        for (start, _) in text.match_indices(entry.as_str()) {
            let end = start + entry.len();
            if is_boundary(text, start) && !text[end..].chars().next().is_some_and(char::is_alphanumeric) {
                found.push((start, end));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for m in found {
        if kept.last().is_none_or(|last| m.0 >= last.1) {
            kept.push(m);
        }
    }
    kept
}

/// Swaps one place name found in `gazetteer` for a different entry.
pub fn perturb_location(example: &Example, gazetteer: &[String], seed: u64) -> Result<Example> {
    let text = &example.hypothesis;
    let sites = matches(text, gazetteer);
    if sites.is_empty() {
        return Err(not_perturbable(example, PerturbationKind::Loc, "no gazetteer match"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, end) = sites[rng.random_range(0..sites.len())];
    let original = &text[start..end];
    let mut replacements: Vec<&str> = gazetteer
        .iter()
        .map(String::as_str)
        .filter(|e| !e.is_empty() && *e != original)
        .collect();
    replacements.sort_unstable();
    replacements.dedup();
    if replacements.is_empty() {
        return Err(not_perturbable(example, PerturbationKind::Loc, "gazetteer has no alternative place"));
    }
    let replacement = replacements[rng.random_range(0..replacements.len())];
    let hypothesis = format!("{}{}{}", &text[..start], replacement, &text[end..]);
    Ok(derive(example, PerturbationKind::Loc, hypothesis))
}
