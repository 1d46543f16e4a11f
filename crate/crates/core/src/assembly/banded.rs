//! Band storage and LU factorisation with partial pivoting.

use crate::error::{Error, Result};

/// Pivot growth beyond which a factorisation is rejected.
pub const MAX_PIVOT_GROWTH: f64 = 1e14;

/// Square matrix with `kl` sub- and `ku` superdiagonals, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.in_band(i, j), "({i}, {j}) outside band");
        i * self.width() + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    /// Columns `i - kl ..= i + ku` of row `i`, clipped to the matrix.
    pub fn row_range(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku).min(self.n - 1)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Quadratic form `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row_range(i).map(|j| self.get(i, j) * y[j]).sum::<f64>())
            .sum()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// LU factorisation with row interchanges. The upper factor gains `kl`
    /// extra superdiagonals of fill.
    pub fn factor(&self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let mut lu = BandedMatrix::zeros(n, kl, self.ku + kl);
        for i in 0..n {
            for j in self.row_range(i) {
                lu.set(i, j, self.get(i, j));
            }
        }
        let scale = self.max_abs();
        let mut pivots = Vec::with_capacity(n);
        let mut u_max = 0.0f64;
        for c in 0..n {
            let last_row = (c + kl).min(n - 1);
            let mut p = c;
            let mut best = lu.get(c, c).abs();
            for r in c + 1..=last_row {
                let v = lu.get(r, c).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots.push(p);
            if !(best > 0.0) {
                return Err(Error::Solver {
                    detail: format!("zero pivot in column {c}"),
                    growth: f64::INFINITY,
                });
            }
            let last_col = (c + lu.ku).min(n - 1);
            if p != c {
                for j in c..=last_col {
                    let tmp = lu.get(c, j);
                    lu.set(c, j, lu.get(p, j));
                    lu.set(p, j, tmp);
                }
            }
            let pivot = lu.get(c, c);
            for r in c + 1..=last_row {
                let l = lu.get(r, c) / pivot;
                lu.set(r, c, l);
                if l != 0.0 {
                    for j in c + 1..=last_col {
                        let v = lu.get(r, j) - l * lu.get(c, j);
                        lu.set(r, j, v);
                    }
                }
            }
            for j in c..=last_col {
                u_max = u_max.max(lu.get(c, j).abs());
            }
        }
        let growth = if scale > 0.0 { u_max / scale } else { f64::INFINITY };
        if !(growth <= MAX_PIVOT_GROWTH) {
            return Err(Error::Solver {
                detail: "pivot growth indicates an ill-conditioned system".into(),
                growth,
            });
        }
        Ok(BandedLu { lu, pivots, growth })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    pivots: Vec<usize>,
    growth: f64,
}

impl BandedLu {
    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let kl = self.lu.kl;
        let mut x = rhs.to_vec();
        for c in 0..n {
            x.swap(c, self.pivots[c]);
            let xc = x[c];
            for r in c + 1..=(c + kl).min(n - 1) {
                x[r] -= self.lu.get(r, c) * xc;
            }
        }
        for c in (0..n).rev() {
            let mut s = x[c];
            for j in c + 1..=(c + self.lu.ku).min(n - 1) {
                s -= self.lu.get(c, j) * x[j];
            }
            x[c] = s / self.lu.get(c, c);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with full-row partial pivoting
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            x.swap(c, p);
            for r in c + 1..n {
                let l = m[r][c] / m[c][c];
                for j in c..n {
                    m[r][j] -= l * m[c][j];
                }
                x[r] -= l * x[c];
            }
        }
        for c in (0..n).rev() {
            let s: f64 = (c + 1..n).map(|j| m[c][j] * x[j]).sum();
            x[c] = (x[c] - s) / m[c][c];
        }
        x
    }

    #[test]
    fn matches_dense_elimination_with_pivoting() {
        let n = 9;
        let (kl, ku) = (2, 2);
        let mut a = BandedMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in a.row_range(i) {
                // weak diagonal forces row swaps
                let v = if i == j {
                    1e-3
                } else {
                    ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64
                };
                a.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let x = a.factor().unwrap().solve(&b);
        let y = dense_solve(&dense, &b);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((xi - yi).abs() < 1e-10 * (1.0 + yi.abs()));
        }
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(2, 2, 1.0);
        assert!(matches!(a.factor(), Err(Error::Solver { .. })));
    }

    #[test]
    fn out_of_band_reads_are_zero() {
        let a = BandedMatrix::zeros(5, 1, 2);
        assert_eq!(a.get(0, 4), 0.0);
        assert!(!a.in_band(3, 1));
        assert!(a.in_band(1, 3));
    }
}
