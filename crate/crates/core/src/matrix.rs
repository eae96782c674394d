use serde::{Deserialize, Serialize};

/// Dense column-major matrix with named columns.
///
/// Column-major storage keeps per-feature scans (tree split search,
/// ranking, block permutation) contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    names: Vec<String>,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from columns. Panics if column lengths disagree or the
    /// name count differs from the column count.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), columns.len(), "one name per column");
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * columns.len());
        for c in &columns {
            assert_eq!(c.len(), n_rows, "ragged columns");
            data.extend_from_slice(c);
        }
        Matrix { n_rows, names, data }
    }

    /// Builds a matrix from row-major rows.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let n_cols = names.len();
        let columns = (0..n_cols)
            .map(|j| rows.iter().map(|r| {
                assert_eq!(r.len(), n_cols, "ragged rows");
                r[j]
            }).collect())
            .collect();
        Self::from_columns(names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n_rows + row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.n_rows..(col + 1) * self.n_rows]
    }

    #[inline]
    pub fn column_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.data[col * self.n_rows..(col + 1) * self.n_rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|c| self.get(row, c)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for c in 0..self.n_cols() {
            let col = self.column(c);
            data.extend(rows.iter().map(|&r| col[r]));
        }
        Matrix { n_rows: rows.len(), names: self.names.clone(), data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for &c in cols {
            data.extend_from_slice(self.column(c));
        }
        Matrix {
            n_rows: self.n_rows,
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            data,
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n_rows, other.n_rows, "row counts differ");
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        Matrix { n_rows: self.n_rows, names, data }
    }
}
