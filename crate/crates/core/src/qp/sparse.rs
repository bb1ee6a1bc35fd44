use std::collections::BTreeMap;

use nalgebra::DMatrix;

/// Accumulates `(row, col, value)` triplets; repeated entries are summed.
#[derive(Debug, Clone, Default)]
pub struct SparseBuilder {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.n && col < self.n, "entry ({row}, {col}) outside {}x{}", self.n, self.n);
        *self.entries.entry((row, col)).or_insert(0.0) += value;
    }

    /// Adds `value` at `(i, j)` and `(j, i)` (once on the diagonal).
    pub fn add_symmetric(&mut self, i: usize, j: usize, value: f64) {
        self.add(i, j, value);
        if i != j {
            self.add(j, i, value);
        }
    }

    pub fn build(self) -> SymmetricSparse {
        let mut rows = vec![Vec::new(); self.n];
        for ((r, c), v) in self.entries {
            if v != 0.0 {
                rows[r].push((c, v));
            }
        }
        SymmetricSparse { n: self.n, rows }
    }
}

/// Row-compressed square matrix, expected to be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparse {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymmetricSparse {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Nonzeros of `row` as `(col, value)`, sorted by column.
    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.rows[row]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row]
            .binary_search_by_key(&col, |&(c, _)| c)
            .map(|k| self.rows[row][k].1)
            .unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows.iter().enumerate().all(|(r, row)| {
            row.iter()
                .all(|&(c, v)| (self.get(c, r) - v).abs() <= tol * v.abs().max(1.0))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v;
            }
        }
        m
    }
}
