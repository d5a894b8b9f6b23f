use crate::error::{invalid, Result};

use super::dense::DenseMatrix;

/// Binary interaction matrix stored as sorted column lists per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    cols: usize,
    indices: Vec<Vec<u32>>,
}

impl SparseBinaryMatrix {
    /// Builds the matrix from arbitrary (unsorted, possibly duplicated) column lists.
    pub fn from_rows(cols: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= cols {
                    return invalid(format!("column index {last} out of range {cols}"));
                }
            }
        }
        Ok(SparseBinaryMatrix {
            rows: rows.len(),
            cols,
            indices: rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.indices[r]
    }

    pub fn nnz(&self) -> usize {
        self.indices.iter().map(Vec::len).sum()
    }

    /// Number of rows containing each column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut df = vec![0usize; self.cols];
        for row in &self.indices {
            for &c in row {
                df[c as usize] += 1;
            }
        }
        df
    }
}

/// Compressed sparse row matrix with real weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets_sorted(
        rows: usize,
        cols: usize,
        per_row: Vec<Vec<(u32, f64)>>,
    ) -> Result<Self> {
        if per_row.len() != rows {
            return invalid("row count mismatch");
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if c as usize >= cols {
                    return invalid(format!("column index {c} out of range {cols}"));
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let per_row = (0..m.rows())
            .map(|r| {
                m.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, &v)| (c as u32, v))
                    .collect()
            })
            .collect();
        Self::from_triplets_sorted(m.rows(), m.cols(), per_row).expect("dense source is consistent")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&(c as u32)) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                m.set(r, c as usize, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut per_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                per_row[c as usize].push((r as u32, v));
            }
        }
        Self::from_triplets_sorted(self.cols, self.rows, per_row).expect("transpose is consistent")
    }

    /// `self * x` for a dense `x` with `self.cols` rows.
    pub fn mul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(x.rows(), self.cols);
        let k = x.cols();
        let mut out = DenseMatrix::zeros(self.rows, k);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in idx.iter().zip(vals) {
                super::dense::axpy(v, x.row(c as usize), out_row);
            }
        }
        out
    }

    /// `selfᵀ * x` for a dense `x` with `self.rows` rows.
    pub fn tmul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(x.rows(), self.rows);
        let k = x.cols();
        let mut out = DenseMatrix::zeros(self.cols, k);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let xr = x.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                super::dense::axpy(v, xr, out.row_mut(c as usize));
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Smoothed inverse document frequency `ln((1+I)/(1+df)) + 1`.
pub fn idf(n_rows: usize, df: usize) -> f64 {
    ((1.0 + n_rows as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Binary TF times smoothed IDF, where the document frequency of a column is
/// the number of rows that contain it.
pub fn tfidf(r: &SparseBinaryMatrix) -> SparseMatrix {
    let df = r.column_counts();
    let idf_vals: Vec<f64> = df.iter().map(|&d| idf(r.rows(), d)).collect();
    let per_row = (0..r.rows())
        .map(|i| {
            r.row(i)
                .iter()
                .map(|&c| (c, idf_vals[c as usize]))
                .collect()
        })
        .collect();
    SparseMatrix::from_triplets_sorted(r.rows(), r.cols(), per_row).expect("binary source is consistent")
}

/// Plain binary matrix as weights of 1 (used when TF-IDF weighting is disabled).
pub fn binary_weights(r: &SparseBinaryMatrix) -> SparseMatrix {
    let per_row = (0..r.rows())
        .map(|i| r.row(i).iter().map(|&c| (c, 1.0)).collect())
        .collect();
    SparseMatrix::from_triplets_sorted(r.rows(), r.cols(), per_row).expect("binary source is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universally_read_item_gets_unit_weight() {
        let r = SparseBinaryMatrix::from_rows(2, vec![vec![0], vec![0, 1], vec![0]]).unwrap();
        let w = tfidf(&r);
        assert_eq!(w.get(0, 0), 1.0);
        assert_eq!(w.get(1, 0), 1.0);
    }

    #[test]
    fn singly_read_item_with_two_users() {
        let r = SparseBinaryMatrix::from_rows(2, vec![vec![0, 1], vec![0]]).unwrap();
        let w = tfidf(&r);
        assert!((w.get(0, 1) - 1.405465108108164).abs() < 1e-12);
        assert_eq!(w.get(1, 1), 0.0);
    }

    #[test]
    fn unread_column_contributes_nothing() {
        let r = SparseBinaryMatrix::from_rows(3, vec![vec![0], vec![1]]).unwrap();
        let w = tfidf(&r);
        assert_eq!(w.nnz(), 2);
        assert_eq!(w.transpose().row(2).0.len(), 0);
    }

    #[test]
    fn idf_strictly_decreases_with_document_frequency() {
        for n in 1..40 {
            for df in 0..n {
                assert!(idf(n, df) > idf(n, df + 1));
            }
        }
    }

    #[test]
    fn out_of_range_column_rejected() {
        assert!(SparseBinaryMatrix::from_rows(2, vec![vec![2]]).is_err());
    }

    #[test]
    fn sparse_products_match_dense() {
        let d = DenseMatrix::from_fn(4, 3, |r, c| if (r + c) % 2 == 0 { (r + 2 * c) as f64 } else { 0.0 });
        let s = SparseMatrix::from_dense(&d);
        let x = DenseMatrix::from_fn(3, 2, |r, c| r as f64 - c as f64 * 0.5);
        assert_eq!(s.mul_dense(&x), d.matmul(&x).unwrap());
        let y = DenseMatrix::from_fn(4, 2, |r, c| (r * c) as f64 + 1.0);
        assert_eq!(s.tmul_dense(&y), d.transpose().matmul(&y).unwrap());
        assert_eq!(s.transpose().to_dense(), d.transpose());
    }
}
