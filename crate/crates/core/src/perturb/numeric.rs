use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive, match_case, not_perturbable, PerturbationKind};
use crate::corpus::Example;
use crate::error::Result;
use crate::text::Words;

pub const NUMBER_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Surface {
    Year,
    Integer { grouped: bool },
    Decimal { places: usize },
    Word,
}

fn classify(core: &str) -> Option<Surface> {
    if NUMBER_WORDS.contains(&core.to_lowercase().as_str()) {
        return Some(Surface::Word);
    }
    if !core.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    if core.chars().all(|c| c.is_ascii_digit()) {
        return if core.len() == 4 && (1000..=2099).contains(&core.parse::<u32>().ok()?) {
            Some(Surface::Year)
        } else if core.len() <= 15 {
            Some(Surface::Integer { grouped: false })
        } else {
            None
        };
    }
    if let Some((int, frac)) = core.split_once('.') {
        if !int.is_empty()
            && !frac.is_empty()
            && frac.len() <= 6
            && int.len() <= 12
            && int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        {
            return Some(Surface::Decimal { places: frac.len() });
        }
        return None;
    }
    let groups: Vec<&str> = core.split(',').collect();
    let well_grouped = groups.len() > 1
        && groups.len() <= 5
        && (1..=3).contains(&groups[0].len())
        && groups[1..].iter().all(|g| g.len() == 3)
        && groups.iter().all(|g| g.chars().all(|c| c.is_ascii_digit()));
    well_grouped.then_some(Surface::Integer { grouped: true })
}

/// A different integer near `value`: offset in `1..=max(5, value)` either way.
fn shift_integer(value: u64, rng: &mut ChaCha8Rng) -> u64 {
    let spread = value.max(5);
    let delta = rng.random_range(1..=spread);
    if delta <= value && rng.random_bool(0.5) {
        value - delta
    } else {
        value + delta
    }
}

fn group_thousands(value: u64) -> String {
    let digits = value.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn replace(core: &str, surface: Surface, rng: &mut ChaCha8Rng) -> String {
    match surface {
        Surface::Year => {
            let year: i64 = core.parse().unwrap();
            let mut delta = rng.random_range(1..=30i64);
            if rng.random_bool(0.5) {
                delta = -delta;
            }
            (year + delta).clamp(1000, 9999).to_string()
        }
        Surface::Integer { grouped } => {
            let value: u64 = core.replace(',', "").parse().unwrap();
            let shifted = shift_integer(value, rng);
            if grouped {
                group_thousands(shifted)
            } else {
                shifted.to_string()
            }
        }
        Surface::Decimal { places } => {
            let (int, frac) = core.split_once('.').unwrap();
            let scaled: u64 = format!("{int}{frac}").parse().unwrap();
            let shifted = shift_integer(scaled, rng);
            let pow = 10u64.pow(places as u32);
            format!("{}.{:0width$}", shifted / pow, shifted % pow, width = places)
        }
        Surface::Word => {
            let lower = core.to_lowercase();
            let others: Vec<&&str> = NUMBER_WORDS.iter().filter(|w| **w != lower).collect();
            match_case(core, others[rng.random_range(0..others.len())])
        }
    }
}

/// Replaces one seeded-chosen number (digits or a number word) with a
/// different value of the same surface class. Years stay four-digit years.
pub fn perturb_numeric(example: &Example, seed: u64) -> Result<Example> {
    let mut words = Words::parse(&example.hypothesis);
    let sites: Vec<(usize, Surface)> = words
        .words
        .iter()
        .enumerate()
        .filter_map(|(i, w)| classify(&w.core).map(|s| (i, s)))
        .collect();
    if sites.is_empty() {
        return Err(not_perturbable(example, PerturbationKind::Num, "no numeric token"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (at, surface) = sites[rng.random_range(0..sites.len())];
    let word = &mut words.words[at];
    let original = word.core.clone();
    let mut replacement = replace(&original, surface, &mut rng);
    // The year clamp can land back on the original at the range edges.
    while replacement == original {
        replacement = replace(&original, surface, &mut rng);
    }
    word.core = replacement;
    Ok(derive(example, PerturbationKind::Num, words.render()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use proptest::prelude::*;

    fn ex(h: &str) -> Example {
        Example::new("h4", "t", h, Label::E)
    }

    #[test]
    fn case_closed_run_length() {
        let source = ex("'Case Closed' has run over 5 years.");
        let out = perturb_numeric(&source, 3).unwrap();
        assert_eq!(out.label, Label::C);
        let value: u64 = out.hypothesis.split(' ').nth(5).unwrap().parse().unwrap();
        assert_ne!(value, 5);
        assert!(value <= 10);
        // 10 is among the reachable replacements.
        assert!((0..200).any(|s| perturb_numeric(&source, s).unwrap().hypothesis == "'Case Closed' has run over 10 years."));
    }

    #[test]
    fn no_digits_rejected() {
        assert!(perturb_numeric(&ex("It has run for many years."), 0).is_err());
    }

    #[test]
    fn number_words_and_groups() {
        let out = perturb_numeric(&ex("Two volumes sold."), 1).unwrap();
        assert!(NUMBER_WORDS.contains(&out.hypothesis.split(' ').next().unwrap().to_lowercase().as_str()));
        assert!(out.hypothesis.starts_with(|c: char| c.is_uppercase()));
        let out = perturb_numeric(&ex("It sold 12,500 copies."), 1).unwrap();
        let token = out.hypothesis.split(' ').nth(2).unwrap();
        let value: u64 = token.replace(',', "").parse().unwrap();
        assert_ne!(value, 12_500);
        assert_eq!(token, group_thousands(value));
        let out = perturb_numeric(&ex("It weighs 3.25 kg."), 1).unwrap();
        let token = out.hypothesis.split(' ').nth(2).unwrap();
        assert_eq!(classify(token), Some(Surface::Decimal { places: 2 }), "{token}");
    }

    proptest! {
        #[test]
        fn years_stay_years(year in 1000u32..=2099, seed in any::<u64>()) {
            let source = ex(&format!("It opened in {year}."));
            let out = perturb_numeric(&source, seed).unwrap();
            let token = out.hypothesis.trim_start_matches("It opened in ").trim_end_matches('.');
            prop_assert_eq!(token.len(), 4);
            prop_assert!(token.chars().all(|c| c.is_ascii_digit()));
            prop_assert_ne!(token.parse::<u32>().unwrap(), year);
        }

        #[test]
        fn integers_stay_integers(value in 0u64..100_000, seed in any::<u64>()) {
            prop_assume!(!(1000..=2099).contains(&value));
            let out = perturb_numeric(&ex(&format!("There are {value} members.")), seed).unwrap();
            let token = out.hypothesis.split(' ').nth(2).unwrap();
            prop_assert!(token.parse::<u64>().is_ok());
            prop_assert_ne!(token.parse::<u64>().unwrap(), value);
        }
    }
}
