use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive, not_perturbable, PerturbationKind};
use crate::corpus::Example;
use crate::error::Result;
use crate::text::{Word, Words};

const MIN_WORD_LEN: usize = 4;

fn eligible(word: &Word) -> bool {
    word.char_len() >= MIN_WORD_LEN
        && !word.is_proper_noun()
        && !word.is_numeric()
        && word.core.chars().all(char::is_alphabetic)
}

/// Typo injection: between 1 and `budget` eligible words each get one
/// adjacent swap, substitution or deletion. Eligible words are alphabetic,
/// at least four characters long and not proper nouns.
pub fn perturb_char(example: &Example, budget: usize, seed: u64) -> Result<Example> {
    let mut words = Words::parse(&example.hypothesis);
    let candidates: Vec<usize> = (0..words.len()).filter(|&i| eligible(&words.words[i])).collect();
    if candidates.is_empty() {
        return Err(not_perturbable(example, PerturbationKind::Char, "no word eligible for a typo"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_edits = budget.clamp(1, candidates.len());
    let edits = rng.random_range(1..=max_edits);
    let mut chosen: Vec<usize> = index::sample(&mut rng, candidates.len(), edits)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    chosen.sort_unstable();
    for i in chosen {
        let word = &mut words.words[i];
        word.core = typo(&word.core, &mut rng);
    }
    Ok(derive(example, PerturbationKind::Char, words.render()))
}

/// Applies one edit; the result always differs from `word`.
fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    match rng.random_range(0..3) {
        0 => {
            let swaps: Vec<usize> = (0..chars.len() - 1).filter(|&i| chars[i] != chars[i + 1]).collect();
            if swaps.is_empty() {
                substitute(&mut chars, rng);
            } else {
                let at = swaps[rng.random_range(0..swaps.len())];
                chars.swap(at, at + 1);
            }
        }
        1 => substitute(&mut chars, rng),
        _ => {
            let at = rng.random_range(0..chars.len());
            chars.remove(at);
        }
    }
    chars.into_iter().collect()
}

fn substitute(chars: &mut [char], rng: &mut ChaCha8Rng) {
    let at = rng.random_range(0..chars.len());
    let original = chars[at].to_ascii_lowercase();
    let replacement = loop {
        let c = (b'a' + rng.random_range(0..26u8)) as char;
        if c != original {
            break c;
        }
    };
    chars[at] = if chars[at].is_uppercase() {
        replacement.to_ascii_uppercase()
    } else {
        replacement
    };
}
