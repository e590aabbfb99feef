use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric positive semidefinite similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    entries: Vec<f64>,
}

impl Kernel {
    const SYMMETRY_TOL: f64 = 1e-9;

    pub fn from_entries(size: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::invalid(
                "kernel",
                format!("{} entries do not form a {size}x{size} matrix", entries.len()),
            ));
        }
        if let Some(bad) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("kernel", format!("non-finite entry at ({}, {})", bad / size, bad % size)));
        }
        for i in 0..size {
            for j in i + 1..size {
                let (a, b) = (entries[i * size + j], entries[j * size + i]);
                if (a - b).abs() > Self::SYMMETRY_TOL {
                    return Err(Error::invalid("kernel", format!("asymmetric at ({i}, {j}): {a} vs {b}")));
                }
            }
        }
        Ok(Kernel { size, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::invalid("kernel", "rows are not square"));
        }
        Kernel::from_entries(size, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Row-major principal submatrix over `indices`.
    pub fn submatrix(&self, indices: &[usize]) -> Vec<f64> {
        indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    /// `L + ridge * I`.
    pub fn with_ridge(&self, ridge: f64) -> Kernel {
        let mut entries = self.entries.clone();
        for i in 0..self.size {
            entries[i * self.size + i] += ridge;
        }
        Kernel { size: self.size, entries }
    }

    /// Conjugation by a permutation: `out[a][b] = self[perm[a]][perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Kernel {
        Kernel {
            size: self.size,
            entries: self.submatrix(perm),
        }
    }

    /// Debug dump: row-major CSV, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            for j in 0..self.size {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{:.8e}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Character n-gram length.
    pub ngram: usize,
    pub lowercase: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { ngram: 3, lowercase: true }
    }
}

/// Sparse L2-normalized n-gram vector as sorted `(feature id, weight)`.
fn featurize(text: &str, config: &FeatureConfig, vocab: &mut HashMap<String, usize>) -> Vec<(usize, f64)> {
    let text = if config.lowercase { text.to_lowercase() } else { text.to_string() };
    let chars: Vec<char> = text.chars().collect();
    let n = config.ngram.max(1);
    let mut counts: HashMap<usize, f64> = HashMap::new();
    let mut add = |gram: String| {
        let next = vocab.len();
        let id = *vocab.entry(gram).or_insert(next);
        *counts.entry(id).or_insert(0.0) += 1.0;
    };
    if chars.len() < n {
        // Too short for any n-gram: the whole string is its only feature.
        add(format!("\u{0}{text}"));
    } else {
        for window in chars.windows(n) {
            add(window.iter().collect());
        }
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    let mut features: Vec<(usize, f64)> = counts.into_iter().map(|(id, c)| (id, c / norm)).collect();
    features.sort_unstable_by_key(|&(id, _)| id);
    features
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Gram matrix of L2-normalized character n-gram count vectors (cosine
/// similarity). The diagonal is exactly 1.
pub fn build_kernel<S: AsRef<str>>(items: &[S], config: &FeatureConfig) -> Result<Kernel> {
    if items.is_empty() {
        return Err(Error::invalid("kernel", "no items"));
    }
    let mut vocab = HashMap::new();
    let vectors: Vec<Vec<(usize, f64)>> = items.iter().map(|s| featurize(s.as_ref(), config, &mut vocab)).collect();
    let n = items.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = sparse_dot(&vectors[i], &vectors[j]).min(1.0);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(Kernel { size: n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SymmetricEigen;

    #[test]
    fn identical_items_have_unit_similarity() {
        let k = build_kernel(&["the cat sat", "the cat sat", "dog"], &FeatureConfig::default()).unwrap();
        assert_eq!(k.get(0, 1), 1.0);
        assert_eq!(k.get(2, 2), 1.0);
    }

    #[test]
    fn disjoint_trigrams_are_orthogonal() {
        let k = build_kernel(&["abcdef", "uvwxyz"], &FeatureConfig::default()).unwrap();
        assert_eq!(k.get(0, 1), 0.0);
    }

    #[test]
    fn kernel_is_psd() {
        let items = [
            "Takahiro Arai wrote the comic",
            "Takahiro Arai wotte the comci",
            "The region of WIMA is Worldwide",
            "WIMA is located in Gambia",
            "Case Closed has run over 5 years",
            "Case Closed has run over 10 years",
            "a",
        ];
        let k = build_kernel(&items, &FeatureConfig::default()).unwrap();
        let eig = SymmetricEigen::jacobi(k.entries(), k.size());
        assert!(eig.values.iter().all(|&v| v >= -1e-9), "{:?}", eig.values);
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(Kernel::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(Kernel::from_rows(&[vec![1.0, 0.5], vec![0.5 + 1e-12, 1.0]]).is_ok());
    }

    #[test]
    fn csv_has_nine_significant_digits() {
        let k = Kernel::from_rows(&[vec![1.0, 1.0 / 3.0], vec![1.0 / 3.0, 1.0]]).unwrap();
        let csv = k.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "1.00000000e0,3.33333333e-1");
    }

    #[test]
    fn permutation_conjugates() {
        let k = build_kernel(&["alpha beta", "beta gamma", "gamma delta"], &FeatureConfig::default()).unwrap();
        let p = k.permuted(&[2, 0, 1]);
        assert_eq!(p.get(0, 1), k.get(2, 0));
        assert_eq!(p.get(1, 2), k.get(0, 1));
    }
}
