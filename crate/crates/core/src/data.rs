use crate::error::{Error, Result};

/// An n×p numeric dataset with feature names, stored row-major.
///
/// This is the universal input type: at least two rows, at least one
/// feature, and every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    feature_names: Vec<String>,
}

impl DataMatrix {
    /// Build a matrix from a flat row-major buffer.
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if n_rows < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n_rows}")));
        }
        if n_cols < 1 {
            return Err(Error::InvalidData("need at least 1 feature".into()));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {}x{} matrix, got {}",
                n_rows * n_cols,
                n_rows,
                n_cols,
                values.len()
            )));
        }
        if feature_names.len() != n_cols {
            return Err(Error::InvalidData(format!(
                "expected {} feature names, got {}",
                n_cols,
                feature_names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            )));
        }
        Ok(Self { n_rows, n_cols, values, feature_names })
    }

    /// Build from rows, naming features `f1..fp`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(n_rows, n_cols, values, default_feature_names(n_cols))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// One row as a feature slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    /// New matrix keeping only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_cols) {
            return Err(Error::InvalidArgument(format!(
                "column {bad} out of range for {} features",
                self.n_cols
            )));
        }
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for row in self.rows() {
            values.extend(cols.iter().map(|&c| row[c]));
        }
        let names = cols.iter().map(|&c| self.feature_names[c].clone()).collect();
        Self::new(self.n_rows, cols.len(), values, names)
    }

    /// New matrix keeping only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} out of range for {} rows",
                self.n_rows
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self::new(rows.len(), self.n_cols, values, self.feature_names.clone())
    }
}

/// `f1..fp`, the fallback naming used everywhere a file has no header.
pub fn default_feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("f{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_row() {
        assert!(DataMatrix::new(1, 2, vec![0.0, 1.0], default_feature_names(2)).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let err = DataMatrix::new(2, 1, vec![0.0, f64::NAN], default_feature_names(1));
        assert!(matches!(err, Err(Error::InvalidData(_))));
    }

    #[test]
    fn select_columns_reorders() {
        let m = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[3.0, 1.0]);
        assert_eq!(s.feature_names(), &["f3".to_string(), "f1".to_string()]);
    }
}
