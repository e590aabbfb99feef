//! Symmetric eigendecomposition.
//!
//! Small matrices use cyclic Jacobi rotations, which converge to full
//! accuracy. Larger ones go through Householder tridiagonalization followed by
//! implicit QL iterations, which is O(n^3) with a much smaller constant.

/// Matrices up to this size are decomposed with Jacobi rotations.
pub const JACOBI_MAX_SIZE: usize = 64;

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub size: usize,
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[j * size..(j + 1) * size]` is the unit eigenvector of `values[j]`.
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    /// `matrix` is row-major `size x size` and must be symmetric.
    pub fn decompose(matrix: &[f64], size: usize) -> Self {
        if size <= JACOBI_MAX_SIZE {
            Self::jacobi(matrix, size)
        } else {
            Self::tridiagonal_ql(matrix, size)
        }
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.size..(j + 1) * self.size]
    }

    /// Cyclic Jacobi; stops once the off-diagonal Frobenius norm drops below 1e-10.
    pub fn jacobi(matrix: &[f64], size: usize) -> Self {
        let n = size;
        let mut a = matrix.to_vec();
        // Row j of `v` accumulates eigenvector j.
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
                .map(|(p, q)| 2.0 * a[p * n + q] * a[p * n + q])
                .sum::<f64>()
                .sqrt();
            if off < JACOBI_TOL {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vpk = v[p * n + k];
                        let vqk = v[q * n + k];
                        v[p * n + k] = c * vpk - s * vqk;
                        v[q * n + k] = s * vpk + c * vqk;
                    }
                }
            }
        }
        let values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        Self::sorted(n, values, v)
    }

    /// Householder reduction to tridiagonal form, then implicit QL with shifts.
    pub fn tridiagonal_ql(matrix: &[f64], size: usize) -> Self {
        let n = size;
        let mut a = matrix.to_vec();
        let (mut d, mut e, betas) = tridiagonalize(n, &mut a);
        // Rows of `w` start as the identity and end as eigenvectors of T.
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        if n > 0 {
            tql2(n, &mut w, &mut d, &mut e);
        }
        for row in w.chunks_exact_mut(n.max(1)) {
            back_transform(n, &a, &betas, row);
        }
        Self::sorted(n, d, w)
    }

    fn sorted(n: usize, values: Vec<f64>, rows: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut vectors = Vec::with_capacity(n * n);
        for &j in &order {
            vectors.extend_from_slice(&rows[j * n..(j + 1) * n]);
        }
        SymmetricEigen {
            size: n,
            values: order.iter().map(|&j| values[j]).collect(),
            vectors,
        }
    }
}

/// Reduces the row-major symmetric matrix in `a` to tridiagonal form with
/// Householder reflectors, touching memory row by row. Returns the diagonal,
/// the sub-diagonal (`e[i]` couples `i - 1` and `i`, `e[0] = 0`) and the
/// reflector scales; reflector `j` is stored in row `j` of `a` as
/// `v = (1, a[j][j+2..])` acting on indices `j+1..`.
fn tridiagonalize(n: usize, a: &mut [f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut betas = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for j in 0..n {
        d[j] = a[j * n + j];
        if j + 1 >= n {
            break;
        }
        let start = j + 1;
        let m = n - start;
        let x0 = a[j * n + start];
        let sigma: f64 = a[j * n + start + 1..(j + 1) * n].iter().map(|x| x * x).sum();
        if m == 1 || sigma == 0.0 {
            e[start] = x0;
            continue;
        }
        let mu = (x0 * x0 + sigma).sqrt();
        let v0 = if x0 <= 0.0 { x0 - mu } else { -sigma / (x0 + mu) };
        let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
        e[start] = mu;
        betas[j] = beta;
        v[0] = 1.0;
        for t in 1..m {
            let scaled = a[j * n + start + t] / v0;
            v[t] = scaled;
            a[j * n + start + t] = scaled;
        }
        let v = &v[..m];
        // p = beta * A' v over the trailing block.
        for i in 0..m {
            let row = &a[(start + i) * n + start..(start + i + 1) * n];
            p[i] = beta * row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        }
        let k = 0.5 * beta * p[..m].iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..m {
            p[i] -= k * v[i];
        }
        let w = &p[..m];
        for i in 0..m {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a[(start + i) * n + start..(start + i + 1) * n];
            for ((x, &vk), &wk) in row.iter_mut().zip(v).zip(w) {
                *x -= vi * wk + wi * vk;
            }
        }
    }
    (d, e, betas)
}

/// Maps an eigenvector of the tridiagonal matrix back to the original basis.
fn back_transform(n: usize, a: &[f64], betas: &[f64], z: &mut [f64]) {
    for j in (0..n.saturating_sub(1)).rev() {
        let beta = betas[j];
        if beta == 0.0 {
            continue;
        }
        let start = j + 1;
        let tail = &a[j * n + start + 1..(j + 1) * n];
        let s = beta * (z[start] + tail.iter().zip(&z[start + 1..]).map(|(x, y)| x * y).sum::<f64>());
        z[start] -= s;
        for (zt, &vt) in z[start + 1..].iter_mut().zip(tail) {
            *zt -= s * vt;
        }
    }
}

/// Implicit QL on the tridiagonal `(d, e)`; `w` holds eigenvectors as rows.
fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (head, tail) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut head[i * n..];
                    let row_next = &mut tail[..n];
                    for k in 0..n {
                        let hk = row_next[k];
                        row_next[k] = s * row_i[k] + c * hk;
                        row_i[k] = c * row_i[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}
