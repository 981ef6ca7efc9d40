//! Minimal compressed sparse storage and a left-looking sparse Cholesky.
//!
//! Matrices here are small to moderate (a few hundred rows) and built once
//! per parameter change, so the code favors clarity over cache tricks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Square matrix in compressed sparse row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros are dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (r, c, v) in triplets {
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    /// Builds a matrix from dense columns produced by `column(j, &mut buf)`.
    pub fn from_columns(n: usize, mut column: impl FnMut(usize, &mut [f64])) -> Self {
        let mut buf = vec![0.0; n];
        let mut triplets = Vec::new();
        for j in 0..n {
            buf.iter_mut().for_each(|x| *x = 0.0);
            column(j, &mut buf);
            for (i, &v) in buf.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

/// Cholesky factor `L` of a symmetric positive-definite matrix (`A = L Lᵀ`),
/// stored by columns. `Lᵀ` is the upper-triangular factor `R` with `A = RᵀR`.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// Column `j`: `(row, value)` pairs with `row >= j`, diagonal first.
    columns: Vec<Vec<(usize, f64)>>,
}

impl SparseCholesky {
    /// Left-looking factorization in natural order.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        // For each row r, the columns k < current with L[r][k] != 0.
        let mut row_links: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut work = vec![0.0; n];
        let mut touched = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new();
        for j in 0..n {
            pattern.clear();
            // A is symmetric; row j holds column j.
            for (i, v) in a.row(j) {
                if i >= j {
                    work[i] = v;
                    if !touched[i] {
                        touched[i] = true;
                        pattern.push(i);
                    }
                }
            }
            for &(k, ljk) in &row_links[j] {
                for &(i, lik) in &columns[k] {
                    if i >= j {
                        work[i] -= lik * ljk;
                        if !touched[i] {
                            touched[i] = true;
                            pattern.push(i);
                        }
                    }
                }
            }
            let diag = work[j];
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = diag.sqrt();
            pattern.sort_unstable();
            let mut col = Vec::with_capacity(pattern.len());
            for &i in &pattern {
                let v = if i == j { ljj } else { work[i] / ljj };
                if i == j || v != 0.0 {
                    col.push((i, v));
                    if i > j {
                        row_links[i].push((j, v));
                    }
                }
                work[i] = 0.0;
                touched[i] = false;
            }
            columns.push(col);
        }
        Ok(Self { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// `log det A = 2 Σ log L_jj`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.columns.iter().map(|c| c[0].1.ln()).sum::<f64>()
    }

    /// `y = R x` with `R = Lᵀ`.
    pub fn upper_mul(&self, x: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(i, v)| v * x[i]).sum())
            .collect()
    }

    /// `y = Rᵀ x = L x`.
    pub fn lower_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                y[i] += v * x[j];
            }
        }
        y
    }

    /// Solves `R x = b` by back substitution.
    pub fn upper_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for j in (0..self.n).rev() {
            let col = &self.columns[j];
            let s: f64 = col[1..].iter().map(|&(i, v)| v * x[i]).sum();
            x[j] = (x[j] - s) / col[0].1;
        }
        x
    }

    /// Solves `Rᵀ x = L x = b` by forward substitution.
    pub fn lower_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for j in 0..self.n {
            let col = &self.columns[j];
            x[j] /= col[0].1;
            let xj = x[j];
            for &(i, v) in &col[1..] {
                x[i] -= v * xj;
            }
        }
        x
    }

    /// Dense upper factor `R`, row-major.
    pub fn upper_dense(&self) -> Vec<Vec<f64>> {
        let mut r = vec![vec![0.0; self.n]; self.n];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                r[j][i] = v;
            }
        }
        r
    }
}
