use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive, not_perturbable, PerturbationKind};
use crate::corpus::Example;
use crate::error::Result;
use crate::text::Words;

/// Swap preference for words at positions `i < j` with core lengths `len_i`
/// and `len_j`: `len_i * len_j / (1 + (j - i))`, as an exact fraction
/// `(numerator, denominator)`.
pub fn swap_score(i: usize, len_i: usize, j: usize, len_j: usize) -> (u64, u64) {
    ((len_i * len_j) as u64, (1 + j.abs_diff(i)) as u64)
}

fn cmp_fraction(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// Swaps the pair of non-proper-noun words that maximizes
/// [`swap_score`]; ties are broken with the seed. Punctuation stays in place.
pub fn perturb_word_swap(example: &Example, seed: u64) -> Result<Example> {
    let mut words = Words::parse(&example.hypothesis);
    let eligible: Vec<usize> = (0..words.len())
        .filter(|&i| {
            let w = &words.words[i];
            !w.core.is_empty() && !w.is_proper_noun()
        })
        .collect();
    let mut best: Vec<(usize, usize)> = Vec::new();
    let mut best_score = (0u64, 1u64);
    for (a, &i) in eligible.iter().enumerate() {
        for &j in &eligible[a + 1..] {
            let (wi, wj) = (&words.words[i], &words.words[j]);
            if wi.core.to_lowercase() == wj.core.to_lowercase() {
                continue;
            }
            let score = swap_score(i, wi.char_len(), j, wj.char_len());
            match cmp_fraction(score, best_score) {
                std::cmp::Ordering::Greater => {
                    best_score = score;
                    best.clear();
                    best.push((i, j));
                }
                std::cmp::Ordering::Equal => best.push((i, j)),
                std::cmp::Ordering::Less => {}
            }
        }
    }
    if best.is_empty() {
        return Err(not_perturbable(
            example,
            PerturbationKind::WordSwap,
            "fewer than two distinct swappable words",
        ));
    }
    let (i, j) = if best.len() == 1 {
        best[0]
    } else {
        best[ChaCha8Rng::seed_from_u64(seed).random_range(0..best.len())]
    };
    let ci = std::mem::take(&mut words.words[i].core);
    let cj = std::mem::replace(&mut words.words[j].core, ci);
    words.words[i].core = cj;
    Ok(derive(example, PerturbationKind::WordSwap, words.render()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn ex(h: &str) -> Example {
        Example::new("h6", "t", h, Label::N)
    }

    #[test]
    fn josh_groban_swap() {
        let out = perturb_word_swap(&ex("Josh Groban was born inside of the US."), 0).unwrap();
        assert_eq!(out.hypothesis, "Josh Groban was inside born of the US.");
        assert_eq!(out.label, Label::N);
    }

    #[test]
    fn proper_nouns_only_rejected() {
        assert!(perturb_word_swap(&ex("Josh Groban"), 0).is_err());
    }

    /// Independent oracle: float scores over all eligible pairs.
    fn brute_force_best(h: &str) -> f64 {
        let words = Words::parse(h);
        let mut best = 0.0f64;
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                let (a, b) = (&words.words[i], &words.words[j]);
                if a.is_proper_noun() || b.is_proper_noun() || a.core.is_empty() || b.core.is_empty() {
                    continue;
                }
                if a.core.to_lowercase() == b.core.to_lowercase() {
                    continue;
                }
                let s = (a.core.chars().count() * b.core.chars().count()) as f64 / (1.0 + (j - i) as f64);
                best = best.max(s);
            }
        }
        best
    }

    #[test]
    fn chosen_pair_maximizes_score() {
        let cases = [
            "the committee approved several ambitious proposals yesterday",
            "a cat sat on the very old mat",
            "Paris hosted the summer games in 2024 with great success",
            "it is what it is",
        ];
        for h in cases {
            for seed in 0..10 {
                let out = perturb_word_swap(&ex(h), seed).unwrap();
                let before = Words::parse(h);
                let after = Words::parse(&out.hypothesis);
                let diff: Vec<usize> = (0..before.len()).filter(|&k| before.words[k] != after.words[k]).collect();
                assert_eq!(diff.len(), 2, "{h} -> {}", out.hypothesis);
                let (i, j) = (diff[0], diff[1]);
                let got = (before.words[i].char_len() * before.words[j].char_len()) as f64 / (1.0 + (j - i) as f64);
                assert!((got - brute_force_best(h)).abs() < 1e-12, "{h}");
            }
        }
    }
}
