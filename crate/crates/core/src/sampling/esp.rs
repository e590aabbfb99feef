/// Elementary symmetric polynomials over eigenvalue prefixes:
/// `get(k, n)` is e_k(λ_1, ..., λ_n).
#[derive(Debug, Clone, PartialEq)]
pub struct EspTable {
    k_max: usize,
    n: usize,
    table: Vec<f64>,
}

impl EspTable {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        if k > self.k_max || n > self.n {
            return 0.0;
        }
        self.table[k * (self.n + 1) + n]
    }
}

/// Builds the table with e[k][n] = e[k][n-1] + λ_n e[k-1][n-1].
pub fn elementary_symmetric(eigenvalues: &[f64], k_max: usize) -> EspTable {
    let n = eigenvalues.len();
    let w = n + 1;
    let mut table = vec![0.0; (k_max + 1) * w];
    for cell in table.iter_mut().take(w) {
        *cell = 1.0;
    }
    for k in 1..=k_max {
        for m in 1..=n {
            table[k * w + m] = table[k * w + m - 1] + eigenvalues[m - 1] * table[(k - 1) * w + m - 1];
        }
    }
    EspTable { k_max, n, table }
}

/// Same recurrence carried in log space, so large k over thousands of
/// eigenvalues neither overflows nor underflows. Zero entries are `-inf`.
#[derive(Debug, Clone)]
pub struct LogEspTable {
    k_max: usize,
    n: usize,
    table: Vec<f64>,
}

impl LogEspTable {
    pub fn new(eigenvalues: &[f64], k_max: usize) -> Self {
        let n = eigenvalues.len();
        let w = n + 1;
        let mut table = vec![f64::NEG_INFINITY; (k_max + 1) * w];
        for cell in table.iter_mut().take(w) {
            *cell = 0.0;
        }
        let logs: Vec<f64> = eigenvalues
            .iter()
            .map(|&l| if l > 0.0 { l.ln() } else { f64::NEG_INFINITY })
            .collect();
        for k in 1..=k_max {
            for m in 1..=n {
                let skip = table[k * w + m - 1];
                let take = logs[m - 1] + table[(k - 1) * w + m - 1];
                table[k * w + m] = log_add(skip, take);
            }
        }
        LogEspTable { k_max, n, table }
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        if k > self.k_max || n > self.n {
            return f64::NEG_INFINITY;
        }
        self.table[k * (self.n + 1) + n]
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
