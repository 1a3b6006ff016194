use rayon::prelude::*;

use super::ModelError;
use crate::scalar::Scalar;
use crate::BitSet;

/// Rows below this count are multiplied sequentially.
const PARALLEL_ROWS: usize = 4096;

/// Compressed-sparse-row matrix over one scalar domain.
///
/// Invariants maintained by every constructor:
/// - `row_offsets` is nondecreasing and ends at the entry count,
/// - column indices are strictly increasing within a row,
/// - stored values are strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
    cols: usize,
}

impl<T: Scalar> SparseMatrix<T> {
    /// A matrix with no entries.
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
            cols,
        }
    }

    /// Builds a matrix from `(row, col, value)` triples.
    ///
    /// Duplicate coordinates are summed, columns are sorted and entries that
    /// sum to zero are dropped. The result does not depend on the order of
    /// `triples`.
    pub fn from_triples(
        triples: impl IntoIterator<Item = (usize, usize, T)>,
        rows: usize,
        cols: usize,
    ) -> Result<Self, ModelError> {
        let mut by_row: Vec<Vec<(usize, T)>> = vec![Vec::new(); rows];
        for (row, col, value) in triples {
            if row >= rows || col >= cols {
                return Err(ModelError::IndexOutOfRange { row, col, rows, cols });
            }
            by_row[row].push((col, value));
        }
        Self::from_rows(by_row, cols)
    }

    /// Builds a matrix from per-row entry lists (any order, duplicates allowed).
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>, cols: usize) -> Result<Self, ModelError> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for (row, mut entries) in rows.into_iter().enumerate() {
            for (col, value) in &entries {
                if *col >= cols {
                    return Err(ModelError::IndexOutOfRange {
                        row,
                        col: *col,
                        rows: row + 1,
                        cols,
                    });
                }
                if !T::EXACT && !value.to_f64().is_finite() {
                    return Err(ModelError::NonFiniteValue { row, col: *col });
                }
                if *value < T::zero() {
                    return Err(ModelError::NegativeValue { row, col: *col });
                }
            }
            // Sorting by value as well makes duplicate summation order-independent.
            entries.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            });
            let mut iter = entries.into_iter().peekable();
            while let Some((col, mut value)) = iter.next() {
                while let Some((_, next)) = iter.next_if(|(c, _)| *c == col) {
                    value = value + next;
                }
                if !value.is_zero() {
                    col_indices.push(col);
                    values.push(value);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            row_offsets,
            col_indices,
            values,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Entries of one row as `(col, value)` pairs in ascending column order.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, &T)> + '_ {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(&self.values[range])
    }

    pub fn row_len(&self, row: usize) -> usize {
        self.row_offsets[row + 1] - self.row_offsets[row]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&T> {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        let cols = &self.col_indices[range.clone()];
        cols.binary_search(&col)
            .ok()
            .map(|pos| &self.values[range.start + pos])
    }

    /// All entries as `(row, col, value)` in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, &T)> + '_ {
        (0..self.rows()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Sum of each row, accumulated left to right.
    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows())
            .map(|r| self.row(r).fold(T::zero(), |acc, (_, v)| acc + v.clone()))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values: Vec<Option<T>> = vec![None; self.nnz()];
        for (r, c, v) in self.triples() {
            let slot = next[c];
            next[c] += 1;
            col_indices[slot] = r;
            values[slot] = Some(v.clone());
        }
        SparseMatrix {
            row_offsets,
            col_indices,
            values: values.into_iter().map(|v| v.expect("slot filled")).collect(),
            cols: self.rows(),
        }
    }

    /// Submatrix of the kept rows and columns, reindexed in order.
    ///
    /// Entries in dropped columns are discarded, so rows may become
    /// substochastic.
    pub fn restrict(&self, keep_rows: &BitSet, keep_cols: &BitSet) -> (Self, IndexMap) {
        let rows = reindex(keep_rows, self.rows());
        let cols = reindex(keep_cols, self.cols);
        let new_cols = keep_cols.ones().filter(|&c| c < self.cols).count();
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.rows() {
            if rows[r].is_none() {
                continue;
            }
            for (c, v) in self.row(r) {
                if let Some(nc) = cols[c] {
                    col_indices.push(nc);
                    values.push(v.clone());
                }
            }
            row_offsets.push(col_indices.len());
        }
        (
            SparseMatrix {
                row_offsets,
                col_indices,
                values,
                cols: new_cols,
            },
            IndexMap { rows, cols },
        )
    }

    /// `y = A·x` with each row accumulated left to right.
    ///
    /// Large matrices are split across threads by row; the result is
    /// bit-identical to the sequential product.
    pub fn multiply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        let row_dot = |r: usize| {
            self.row(r)
                .fold(T::zero(), |acc, (c, v)| acc + v.clone() * x[c].clone())
        };
        if self.rows() >= PARALLEL_ROWS {
            (0..self.rows()).into_par_iter().map(row_dot).collect()
        } else {
            (0..self.rows()).map(row_dot).collect()
        }
    }

    /// Dot product of one row with `x`.
    pub fn row_dot(&self, row: usize, x: &[T]) -> T {
        self.row(row)
            .fold(T::zero(), |acc, (c, v)| acc + v.clone() * x[c].clone())
    }

    /// Converts entries into another scalar domain.
    pub fn map_values<U: Scalar>(&self, f: impl Fn(&T) -> U) -> SparseMatrix<U> {
        SparseMatrix {
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(f).collect(),
            cols: self.cols,
        }
    }
}

/// Old-to-new index maps produced by [`SparseMatrix::restrict`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    pub rows: Vec<Option<usize>>,
    pub cols: Vec<Option<usize>>,
}

fn reindex(keep: &BitSet, len: usize) -> Vec<Option<usize>> {
    let mut next = 0;
    (0..len)
        .map(|i| {
            if keep.contains(i) {
                next += 1;
                Some(next - 1)
            } else {
                None
            }
        })
        .collect()
}

/// Builds a matrix from triples. See [`SparseMatrix::from_triples`].
pub fn build_sparse<T: Scalar>(
    triples: impl IntoIterator<Item = (usize, usize, T)>,
    rows: usize,
    cols: usize,
) -> Result<SparseMatrix<T>, ModelError> {
    SparseMatrix::from_triples(triples, rows, cols)
}
