use super::kernel::Kernel;

const GAIN_FLOOR: f64 = 1e-12;

/// Greedy log-determinant maximization via incremental Cholesky updates.
/// Ties go to the lowest index. Once no candidate adds volume the remaining
/// slots are filled with the lowest unselected indices.
pub fn greedy_map(kernel: &Kernel, k: usize) -> Vec<usize> {
    let n = kernel.size();
    let k = k.min(n);
    let mut gains: Vec<f64> = (0..n).map(|i| kernel.get(i, i)).collect();
    let mut chol = vec![0.0; n * k];
    let mut picked = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    for it in 0..k {
        let best = (0..n)
            .filter(|&i| !taken[i])
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(b) if gains[b] >= gains[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n leaves a candidate");
        if gains[best] <= GAIN_FLOOR {
            picked.extend((0..n).filter(|&i| !taken[i]).take(k - it));
            break;
        }
        picked.push(best);
        taken[best] = true;
        let scale = gains[best].sqrt();
        let cj = chol[best * k..best * k + it].to_vec();
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let proj: f64 = chol[i * k..i * k + it].iter().zip(&cj).map(|(a, b)| a * b).sum();
            let e = (kernel.get(best, i) - proj) / scale;
            chol[i * k + it] = e;
            gains[i] -= e * e;
        }
    }
    picked
}
