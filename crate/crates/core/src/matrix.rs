//! Dense row-stochastic matrices and the small linear algebra the crate needs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on row sums accepted at construction.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A row-major matrix whose rows are probability vectors.
///
/// Cumulative rows are cached so that sampling a row is a single scan.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StochasticMatrix {
    /// Builds a matrix from its rows, checking shape, signs and row sums.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("matrix has no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::Validation("matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension {
                    what: "matrix row length",
                    expected: cols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) = {v} is not a probability"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic { row: i, sum });
            }
            data.extend_from_slice(row);
        }
        Ok(Self::from_parts(rows.len(), cols, data))
    }

    /// Builds a matrix after rescaling every row to sum to one.
    ///
    /// Returns the matrix and the largest absolute deviation of an input row
    /// sum from one. Used for published matrices that were printed rounded.
    pub fn from_rows_normalized(rows: &[Vec<f64>]) -> Result<(Self, f64)> {
        let mut worst = 0.0_f64;
        let mut fixed = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) || row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::NotStochastic { row: i, sum });
            }
            worst = worst.max((sum - 1.0).abs());
            fixed.push(row.iter().map(|v| v / sum).collect::<Vec<_>>());
        }
        Ok((Self::from_rows(&fixed)?, worst))
    }

    fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        let mut cumulative = vec![0.0; data.len()];
        for r in 0..rows {
            let mut acc = 0.0;
            for c in 0..cols {
                acc += data[r * cols + c];
                cumulative[r * cols + c] = acc;
            }
        }
        Self {
            rows,
            cols,
            data,
            cumulative,
        }
    }

    /// The `n x n` identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_parts(n, n, data)
    }

    /// The `n`-ary symmetric matrix with total off-diagonal mass `error`.
    pub fn symmetric(n: usize, error: f64) -> Result<Self> {
        if n < 2 || !(0.0..=1.0).contains(&error) {
            return Err(Error::Validation(format!(
                "symmetric matrix needs n >= 2 and error in [0,1], got n={n}, error={error}"
            )));
        }
        let off = error / (n - 1) as f64;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 1.0 - error } else { off })
                    .collect()
            })
            .collect();
        Self::from_rows(&rows)
    }

    /// A matrix whose rows all equal `row`.
    pub fn repeated_row(n: usize, row: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| row.to_vec()).collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Samples a column index from row `r`.
    #[inline]
    pub fn sample_row<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let cum = &self.cumulative[r * self.cols..(r + 1) * self.cols];
        for (c, &acc) in cum.iter().enumerate() {
            if u < acc {
                return c;
            }
        }
        // Rounding left u above the last partial sum; take the last column
        // with positive mass.
        let row = self.row(r);
        (0..self.cols).rev().find(|&c| row[c] > 0.0).unwrap_or(0)
    }

    /// Row vector times matrix: `out[j] = sum_i v[i] * K[i][j]`.
    pub fn left_multiply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(self.row(i)) {
                *o += w * k;
            }
        }
    }

    pub fn left_multiply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.left_multiply_into(v, &mut out);
        out
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n`.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::Dimension {
            what: "linear system",
            expected: n * n,
            found: a.len(),
        });
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Validation("singular linear system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}
