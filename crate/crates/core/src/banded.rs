//! Band matrices, LU with partial pivoting, symmetric inertia counts and
//! bordered (one extra row and column) solves by block elimination.

use crate::error::{Error, Result};

/// Pivots below `PIVOT_RTOL * max|a_ij|` are treated as zero.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|x| *x = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            self.add(i, i, s);
        }
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in self.row_range(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Number of stored diagonals that hold at least one nonzero.
    pub fn nonzero_diagonals(&self) -> usize {
        let mut count = 0;
        for d in -(self.kl as isize)..=(self.ku as isize) {
            let hit = (0..self.n).any(|i| {
                let j = i as isize + d;
                j >= 0 && (j as usize) < self.n && self.get(i, j as usize) != 0.0
            });
            count += usize::from(hit);
        }
        count
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// LU factors of a band matrix with row interchanges.
///
/// Row `i` of `u` covers columns `i - kl ..= i + kl + ku` so fill-in from
/// pivoting stays inside the stored window.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    u: Vec<f64>,
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let w = 2 * kl + ku + 1;
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            for j in a.row_range(i) {
                u[i * w + j + kl - i] = a.get(i, j);
            }
        }
        let at = |i: usize, j: usize| i * w + j + kl - i;
        let scale = a.max_abs();
        let tiny = PIVOT_RTOL * scale;
        let mut l = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = u[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = u[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(Error::Singular {
                    row: k,
                    pivot: u[at(p, k)],
                });
            }
            piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    u.swap(at(k, j), at(p, j));
                }
            }
            let pivot = u[at(k, k)];
            for i in k + 1..=last_row {
                let m = u[at(i, k)] / pivot;
                l[k * kl + (i - k - 1)] = m;
                u[at(i, k)] = 0.0;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        u[at(i, j)] -= m * u[at(k, j)];
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, u, l, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!("rhs length {} vs matrix {}", b.len(), self.n)));
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = 2 * kl + ku + 1;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.l[k * kl + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.u[k * w + j + kl - k] * x[j];
            }
            x[k] = s / self.u[k * w + kl];
        }
        Ok(x)
    }
}

/// Solves `a x = b` with one step of iterative refinement.
pub fn solve_refined(a: &BandMatrix, lu: &BandLu, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = lu.solve(b)?;
    let ax = a.matvec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let dx = lu.solve(&r)?;
    x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
    Ok(x)
}

/// Number of negative pivots of a symmetric band matrix `a - shift I` in an
/// unpivoted LDLᵀ elimination, i.e. the number of eigenvalues below `shift`.
pub fn negative_eigenvalue_count(a: &BandMatrix, shift: f64) -> Result<usize> {
    let (n, k) = (a.n, a.kl);
    if a.ku != k {
        return Err(Error::Dimension("inertia count needs a symmetric band".into()));
    }
    // Row i holds columns i..=i+k of the trailing submatrix.
    let mut s = vec![0.0; n * (k + 1)];
    for i in 0..n {
        for d in 0..=k.min(n - 1 - i) {
            s[i * (k + 1) + d] = a.get(i, i + d);
        }
        s[i * (k + 1)] -= shift;
    }
    let mut negatives = 0;
    for i in 0..n {
        let d = s[i * (k + 1)];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Singular { row: i, pivot: d });
        }
        if d < 0.0 {
            negatives += 1;
        }
        let reach = k.min(n - 1 - i);
        for a_off in 1..=reach {
            let m = s[i * (k + 1) + a_off] / d;
            if m == 0.0 {
                continue;
            }
            let row = i + a_off;
            for b_off in a_off..=reach {
                s[row * (k + 1) + (b_off - a_off)] -= m * s[i * (k + 1) + b_off];
            }
        }
    }
    Ok(negatives)
}

/// Extra column `col`, row `row` and corner entry of a bordered system
/// `[A col; rowᵀ corner]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Border {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
    pub corner: f64,
}

/// Band matrix, optionally bordered by one row and column, with its right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    pub matrix: BandMatrix,
    pub border: Option<Border>,
    pub rhs: Vec<f64>,
}

impl BandedSystem {
    pub fn new(matrix: BandMatrix, rhs: Vec<f64>) -> Self {
        BandedSystem {
            matrix,
            border: None,
            rhs,
        }
    }

    pub fn bordered(matrix: BandMatrix, border: Border, rhs: Vec<f64>) -> Self {
        BandedSystem {
            matrix,
            border: Some(border),
            rhs,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n + usize::from(self.border.is_some())
    }

    fn validate(&self) -> Result<()> {
        let n = self.matrix.n;
        if n == 0 {
            return Err(Error::Dimension("empty system".into()));
        }
        if self.rhs.len() != self.dim() {
            return Err(Error::Dimension(format!("rhs length {} vs system {}", self.rhs.len(), self.dim())));
        }
        if let Some(b) = &self.border {
            if b.col.len() != n || b.row.len() != n {
                return Err(Error::Dimension(format!(
                    "border lengths {}/{} vs band {}",
                    b.col.len(),
                    b.row.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    /// `[A col; rowᵀ corner] x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.matrix.n;
        let mut y = self.matrix.matvec(&x[..n]);
        if let Some(b) = &self.border {
            let t = x[n];
            y.iter_mut().zip(&b.col).for_each(|(yi, ci)| *yi += ci * t);
            let last = b.row.iter().zip(&x[..n]).map(|(r, xi)| r * xi).sum::<f64>() + b.corner * t;
            y.push(last);
        }
        y
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.matrix.n;
        match &self.border {
            None => self.matrix.norm_inf(),
            Some(b) => {
                let band = (0..n)
                    .map(|i| {
                        self.matrix.row_range(i).map(|j| self.matrix.get(i, j).abs()).sum::<f64>() + b.col[i].abs()
                    })
                    .fold(0.0, f64::max);
                let last = b.row.iter().map(|x| x.abs()).sum::<f64>() + b.corner.abs();
                band.max(last)
            }
        }
    }
}

fn block_solve(lu: &BandLu, b: &Border, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = lu.n;
    let z1 = lu.solve(&rhs[..n])?;
    let z2 = lu.solve(&b.col)?;
    let dot = |v: &[f64]| b.row.iter().zip(v).map(|(r, x)| r * x).sum::<f64>();
    let schur = b.corner - dot(&z2);
    if schur == 0.0 || !schur.is_finite() {
        return Err(Error::Singular { row: n, pivot: schur });
    }
    let t = (rhs[n] - dot(&z1)) / schur;
    let mut x: Vec<f64> = z1.iter().zip(&z2).map(|(a, c)| a - t * c).collect();
    x.push(t);
    Ok(x)
}

/// Gaussian elimination with partial pivoting on a dense copy. Used when the
/// band block of a bordered system is singular but the whole system is not.
fn dense_solve(sys: &BandedSystem) -> Result<Vec<f64>> {
    let m = sys.dim();
    let n = sys.matrix.n;
    let mut a = vec![0.0; m * m];
    for i in 0..n {
        for j in sys.matrix.row_range(i) {
            a[i * m + j] = sys.matrix.get(i, j);
        }
    }
    if let Some(b) = &sys.border {
        for i in 0..n {
            a[i * m + n] = b.col[i];
            a[n * m + i] = b.row[i];
        }
        a[n * m + n] = b.corner;
    }
    let scale = a.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let mut x = sys.rhs.clone();
    for k in 0..m {
        let p = (k..m)
            .max_by(|&i, &j| a[i * m + k].abs().total_cmp(&a[j * m + k].abs()))
            .unwrap_or(k);
        let pivot = a[p * m + k];
        if !(pivot.abs() > PIVOT_RTOL * scale) {
            return Err(Error::Singular { row: k, pivot });
        }
        if p != k {
            for j in 0..m {
                a.swap(k * m + j, p * m + j);
            }
            x.swap(k, p);
        }
        for i in k + 1..m {
            let f = a[i * m + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..m {
                a[i * m + j] -= f * a[k * m + j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..m).rev() {
        let s: f64 = (k + 1..m).map(|j| a[k * m + j] * x[j]).sum();
        x[k] = (x[k] - s) / a[k * m + k];
    }
    Ok(x)
}

/// Solves a banded or bordered-banded system.
///
/// Bordered systems go through block elimination of the border followed by
/// one refinement step on the full system; if the band block itself is
/// singular (exactly at a fold, say) a dense fallback is used.
pub fn banded_solve(sys: &BandedSystem) -> Result<Vec<f64>> {
    sys.validate()?;
    match &sys.border {
        None => {
            let lu = BandLu::factor(&sys.matrix)?;
            solve_refined(&sys.matrix, &lu, &sys.rhs)
        }
        Some(b) => {
            let lu = match BandLu::factor(&sys.matrix) {
                Ok(lu) => lu,
                Err(Error::Singular { .. }) => return dense_solve(sys),
                Err(e) => return Err(e),
            };
            let mut x = match block_solve(&lu, b, &sys.rhs) {
                Ok(x) => x,
                Err(Error::Singular { .. }) => return dense_solve(sys),
                Err(e) => return Err(e),
            };
            let ax = sys.apply(&x);
            let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = block_solve(&lu, b, &r)?;
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            Ok(x)
        }
    }
}
