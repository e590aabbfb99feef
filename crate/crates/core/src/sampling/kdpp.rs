use rand::Rng;

use super::eigen::SymmetricEigen;
use super::esp::LogEspTable;
use super::kernel::Kernel;
use super::EIGEN_EPS;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Eigendecomposed kernel ready for repeated k-DPP draws.
#[derive(Debug, Clone)]
pub struct KDppSampler {
    size: usize,
    values: Vec<f64>,
    eigen: SymmetricEigen,
    rank: usize,
}

impl KDppSampler {
    pub fn new(kernel: &Kernel) -> Self {
        let eigen = SymmetricEigen::decompose(kernel.entries(), kernel.size());
        let values: Vec<f64> = eigen
            .values
            .iter()
            .map(|&l| if l <= EIGEN_EPS { 0.0 } else { l })
            .collect();
        let rank = values.iter().filter(|&&l| l > 0.0).count();
        KDppSampler {
            size: kernel.size(),
            values,
            eigen,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Clamped eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Draws k distinct indices, returned in ascending order.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::invalid("k", "sample size must be at least 1"));
        }
        if k > self.rank {
            return Err(Error::RankDeficient { k, rank: self.rank });
        }
        let chosen = self.select_eigenvectors(k, rng);
        let mut picked = self.project(&chosen, rng);
        picked.sort_unstable();
        Ok(picked)
    }

    pub fn sample_seeded(&self, k: usize, seed: u64) -> Result<Vec<usize>> {
        self.sample(k, &mut rng_for(seed, "k-dpp"))
    }

    fn select_eigenvectors<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<usize> {
        let esp = LogEspTable::new(&self.values, k);
        let mut remaining = k;
        let mut chosen = Vec::with_capacity(k);
        for n in (1..=self.size).rev() {
            if remaining == 0 {
                break;
            }
            if n == remaining {
                // Every remaining eigenvector is forced.
                chosen.extend((0..n).rev());
                break;
            }
            let lambda = self.values[n - 1];
            if lambda <= 0.0 {
                continue;
            }
            let log_p = lambda.ln() + esp.get(remaining - 1, n - 1) - esp.get(remaining, n);
            if rng.random::<f64>().ln() < log_p {
                chosen.push(n - 1);
                remaining -= 1;
            }
        }
        chosen
    }

    /// Sequential sampling from the elementary DPP spanned by `chosen`,
    /// orthogonalizing the remaining mass after each pick.
    fn project<R: Rng + ?Sized>(&self, chosen: &[usize], rng: &mut R) -> Vec<usize> {
        let n = self.size;
        let k = chosen.len();
        // y[i * k + t] is coordinate i of chosen eigenvector t.
        let mut y = vec![0.0; n * k];
        for (t, &j) in chosen.iter().enumerate() {
            for (i, &x) in self.eigen.vector(j).iter().enumerate() {
                y[i * k + t] = x;
            }
        }
        let mut norms2: Vec<f64> = (0..n).map(|i| y[i * k..(i + 1) * k].iter().map(|x| x * x).sum()).collect();
        let mut c = vec![0.0; n * k];
        let mut picked = Vec::with_capacity(k);
        let mut taken = vec![false; n];
        for it in 0..k {
            let j = draw(&norms2, &taken, rng);
            picked.push(j);
            taken[j] = true;
            let scale = norms2[j].max(f64::MIN_POSITIVE).sqrt();
            let (yj, cj) = (y[j * k..(j + 1) * k].to_vec(), c[j * k..j * k + it].to_vec());
            for i in 0..n {
                if taken[i] {
                    norms2[i] = 0.0;
                    continue;
                }
                let dot: f64 = y[i * k..(i + 1) * k].iter().zip(&yj).map(|(a, b)| a * b).sum();
                let proj: f64 = c[i * k..i * k + it].iter().zip(&cj).map(|(a, b)| a * b).sum();
                let v = (dot - proj) / scale;
                c[i * k + it] = v;
                norms2[i] = (norms2[i] - v * v).max(0.0);
            }
        }
        picked
    }
}

fn draw<R: Rng + ?Sized>(weights: &[f64], taken: &[bool], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let mut u = rng.random::<f64>() * total;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if u < w {
                    return i;
                }
                u -= w;
                last = Some(i);
            }
        }
        if let Some(i) = last {
            return i;
        }
    }
    // All residual mass lost to rounding; take any unused index.
    let free: Vec<usize> = (0..weights.len()).filter(|&i| !taken[i]).collect();
    free[rng.random_range(0..free.len())]
}

/// Draws a size-k subset with probability proportional to det(L_S).
pub fn sample_k_dpp(kernel: &Kernel, k: usize, seed: u64) -> Result<Vec<usize>> {
    KDppSampler::new(kernel).sample_seeded(k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(m: &[f64], n: usize) -> f64 {
        let mut a = m.to_vec();
        let mut d = 1.0;
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs())).unwrap();
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                d = -d;
            }
            d *= a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        d
    }

    fn kernel6() -> Kernel {
        Kernel::from_rows(&[
            vec![2.0, 0.6, 0.3, 0.1, 0.0, 0.2],
            vec![0.6, 1.5, 0.4, 0.2, 0.1, 0.0],
            vec![0.3, 0.4, 1.2, 0.5, 0.3, 0.1],
            vec![0.1, 0.2, 0.5, 1.8, 0.4, 0.3],
            vec![0.0, 0.1, 0.3, 0.4, 1.0, 0.5],
            vec![0.2, 0.0, 0.1, 0.3, 0.5, 1.4],
        ])
        .unwrap()
    }

    #[test]
    fn full_rank_k_equals_n_is_everything() {
        let k = kernel6();
        assert_eq!(sample_k_dpp(&k, 6, 3).unwrap(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let k = Kernel::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(sample_k_dpp(&k, 2, 0), Err(Error::RankDeficient { k: 2, rank: 1 })));
        assert!(sample_k_dpp(&k, 0, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let k = kernel6();
        let s = KDppSampler::new(&k);
        assert_eq!(s.sample_seeded(3, 11).unwrap(), s.sample_seeded(3, 11).unwrap());
    }

    #[test]
    fn singletons_follow_diagonal() {
        let k = kernel6();
        let s = KDppSampler::new(&k);
        let mut rng = rng_for(5, "singles");
        let draws = 60_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            counts[s.sample(1, &mut rng).unwrap()[0]] += 1;
        }
        let trace: f64 = (0..6).map(|i| k.get(i, i)).sum();
        for i in 0..6 {
            let want = k.get(i, i) / trace;
            assert!((counts[i] as f64 / draws as f64 - want).abs() < 0.01);
        }
    }

    #[test]
    fn subset_frequencies_match_determinants() {
        let k = kernel6();
        let s = KDppSampler::new(&k);
        let subsets: Vec<Vec<usize>> = (0u32..64)
            .filter(|m| m.count_ones() == 3)
            .map(|m| (0..6).filter(|i| m >> i & 1 == 1).collect())
            .collect();
        let dets: Vec<f64> = subsets.iter().map(|sub| det(&k.submatrix(sub), 3)).collect();
        let z: f64 = dets.iter().sum();
        let mut rng = rng_for(1, "tv");
        let draws = 40_000;
        let mut counts = vec![0usize; subsets.len()];
        for _ in 0..draws {
            let got = s.sample(3, &mut rng).unwrap();
            counts[subsets.iter().position(|x| *x == got).unwrap()] += 1;
        }
        let tv: f64 = 0.5
            * dets
                .iter()
                .zip(&counts)
                .map(|(d, &c)| (d / z - c as f64 / draws as f64).abs())
                .sum::<f64>();
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn large_kernel_uses_ql_path() {
        let items: Vec<String> = (0..150).map(|i| format!("item number {i} with tail {}", i * 7 % 13)).collect();
        let kernel = super::super::build_kernel(&items, &Default::default()).unwrap();
        let s = KDppSampler::new(&kernel);
        let k = 40.min(s.rank());
        let got = s.sample_seeded(k, 2).unwrap();
        assert_eq!(got.len(), k);
        assert!(got.windows(2).all(|w| w[0] < w[1]));
    }
}
