//! Linear solvers for the implicit half of each time step.

/// Banded matrix with `kl` sub- and `ku` super-diagonals, factorized in place by Gaussian
/// elimination with partial pivoting. Pivoting widens the upper band to `kl + ku`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            factored: false,
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside the band"
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    /// Factorizes in place. Returns `false` when a zero pivot is hit.
    pub fn factor(&mut self) -> bool {
        let n = self.n;
        let upper = self.kl + self.ku;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return false;
            }
            self.pivots[k] = p;
            let right = (k + upper).min(n - 1);
            if p != k {
                for j in k..=right {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let diag = self.get(k, k);
            for i in k + 1..=last {
                let s = self.slot(i, k);
                let l = self.data[s] / diag;
                self.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..=right {
                        let u = self.get(k, j);
                        let t = self.slot(i, j);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        self.factored = true;
        true
    }

    /// Solves in place with the factors from [`factor`](Self::factor).
    pub fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored, "band matrix not factored");
        let n = self.n;
        let upper = self.kl + self.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                rhs.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                rhs[i] -= self.get(i, k) * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let right = (k + upper).min(n - 1);
            let mut acc = rhs[k];
            for j in k + 1..=right {
                acc -= self.get(k, j) * rhs[j];
            }
            rhs[k] = acc / self.get(k, k);
        }
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, Default)]
pub(crate) struct CsrMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().expect("previous entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_start.push(cols.len());
        }
        Self {
            n,
            row_start,
            cols,
            vals,
        }
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_start[i]..self.row_start[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(1.0, |k| self.vals[k])
            })
            .collect()
    }

    /// Jacobi-preconditioned BiCGSTAB; `x` holds the initial guess and receives the solution.
    /// Returns the final relative residual.
    pub fn bicgstab(&self, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> f64 {
        let n = self.n;
        let inv_diag: Vec<f64> = self
            .diagonal()
            .into_iter()
            .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let b_norm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);

        let mut r = vec![0.0; n];
        self.mul(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut rel = dot(&r, &r).sqrt() / b_norm;
        for _ in 0..max_iter {
            if rel < tol {
                break;
            }
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                y[i] = inv_diag[i] * p[i];
            }
            self.mul(&y, &mut v);
            alpha = rho / dot(&r_hat, &v);
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if dot(&s, &s).sqrt() / b_norm < tol {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                rel = dot(&s, &s).sqrt() / b_norm;
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * s[i];
            }
            self.mul(&z, &mut t);
            omega = dot(&t, &s) / dot(&t, &t);
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            rel = dot(&r, &r).sqrt() / b_norm;
        }
        rel
    }
}
