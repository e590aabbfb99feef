//! Shared inputs for the benchmarks.

use inoc_core::sampling::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random PSD kernel `B Bᵀ` with `n` items and `rank` latent features.
pub fn random_kernel(n: usize, rank: usize, seed: u64) -> Kernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = (0..n * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..rank).map(|t| b[i * rank + t] * b[j * rank + t]).sum();
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Kernel::from_entries(n, entries).expect("symmetric by construction")
}

/// Synthetic hypotheses with overlapping vocabulary.
pub fn hypotheses(n: usize, seed: u64) -> Vec<String> {
    const WORDS: &[&str] = &[
        "club", "founded", "members", "city", "river", "award", "league", "album", "released", "located", "capital",
        "population", "series", "author", "station", "museum",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let words: Vec<&str> = (0..6).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
            format!("Item {i} {} in {}.", words.join(" "), 1900 + i % 120)
        })
        .collect()
}

/// Model outputs in the shapes the extractor sees.
pub fn responses() -> Vec<String> {
    let mut out = Vec::new();
    for verdict in ["Yes", "No", "Neutral", "yes", "no", "it is not possible to tell"] {
        out.push(format!("A: {verdict}"));
        out.push(format!("E: The premise lists the founding year and the location of the club. A: {verdict}"));
        out.push(format!("🎉 The answer is {verdict}."));
        out.push(format!(
            "E: Looking at row three, A: might be quoted here, but the table says otherwise. A: {verdict} 👍"
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_well_formed() {
        let k = random_kernel(10, 4, 1);
        assert_eq!(k.size(), 10);
        assert_eq!(hypotheses(5, 1).len(), 5);
        assert_eq!(responses().len(), 24);
    }
}
