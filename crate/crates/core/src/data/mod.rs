//! Sparse dataset representation and ingest.
//!
//! [`SparseDataset`] is the universal data carrier: a CSR feature matrix with
//! ±1 labels and per-row nonnegative weights. Datasets are immutable after
//! construction and safe to share across workers by reference.

mod libsvm;
mod partition;
mod synth;

pub use libsvm::{parse_libsvm, write_libsvm};
pub use partition::{partition, subsample, PartitionPlan};
pub use synth::{planted_model, synth_sparse, synth_with_model};

use crate::error::{Error, Result};

/// CSR feature matrix with ±1 labels and per-row weights.
///
/// Invariants (checked by [`SparseDataset::validate`], which every
/// constructor runs):
/// - `row_offsets` is nondecreasing, has length `n_rows + 1`, and ends at
///   `nnz`;
/// - column indices are `< n_cols` and strictly increasing within a row;
/// - `labels` and `row_weights` have length `n_rows`, labels are exactly
///   ±1, weights are nonnegative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    row_weights: Vec<f64>,
}

impl SparseDataset {
    /// Builds a dataset from raw CSR arrays, validating every invariant.
    pub fn from_csr(
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        labels: Vec<f64>,
        row_weights: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.is_empty() {
            return Err(Error::InvalidData("row_offsets must not be empty".into()));
        }
        let ds = SparseDataset {
            n_rows: row_offsets.len() - 1,
            n_cols,
            row_offsets,
            col_indices,
            values,
            labels,
            row_weights,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// An empty dataset with `n_cols` columns and no rows.
    pub fn empty(n_cols: usize) -> Self {
        SparseDataset {
            n_rows: 0,
            n_cols,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
            row_weights: Vec::new(),
        }
    }

    /// Checks all CSR and label invariants.
    pub fn validate(&self) -> Result<()> {
        if self.row_offsets.len() != self.n_rows + 1 {
            return Err(Error::InvalidData(format!(
                "row_offsets length {} does not match n_rows {} + 1",
                self.row_offsets.len(),
                self.n_rows
            )));
        }
        if self.row_offsets[0] != 0 {
            return Err(Error::InvalidData("row_offsets must start at 0".into()));
        }
        let nnz = *self.row_offsets.last().unwrap();
        if self.col_indices.len() != nnz || self.values.len() != nnz {
            return Err(Error::InvalidData(format!(
                "nnz mismatch: offsets say {}, indices {}, values {}",
                nnz,
                self.col_indices.len(),
                self.values.len()
            )));
        }
        if self.labels.len() != self.n_rows || self.row_weights.len() != self.n_rows {
            return Err(Error::InvalidData(format!(
                "labels ({}) and row_weights ({}) must both have length n_rows ({})",
                self.labels.len(),
                self.row_weights.len(),
                self.n_rows
            )));
        }
        for i in 0..self.n_rows {
            let (start, end) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if start > end {
                return Err(Error::InvalidData(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let mut prev: Option<usize> = None;
            for k in start..end {
                let col = self.col_indices[k];
                if col >= self.n_cols {
                    return Err(Error::InvalidData(format!(
                        "column index {col} out of range (d = {})",
                        self.n_cols
                    )));
                }
                if let Some(p) = prev {
                    if col <= p {
                        return Err(Error::InvalidData(format!(
                            "column indices not strictly increasing in row {i}"
                        )));
                    }
                }
                prev = Some(col);
                if !self.values[k].is_finite() {
                    return Err(Error::InvalidData(format!(
                        "non-finite value in row {i}"
                    )));
                }
            }
            if self.labels[i] != 1.0 && self.labels[i] != -1.0 {
                return Err(Error::InvalidData(format!(
                    "label at row {i} is {}, expected -1 or +1",
                    self.labels[i]
                )));
            }
            if self.row_weights[i] < 0.0 || !self.row_weights[i].is_finite() {
                return Err(Error::InvalidData(format!(
                    "row weight at row {i} is {}, expected finite and >= 0",
                    self.row_weights[i]
                )));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (start, end) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[start..end], &self.values[start..end])
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row_weight(&self, i: usize) -> f64 {
        self.row_weights[i]
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    /// Sum of all row weights.
    pub fn total_weight(&self) -> f64 {
        self.row_weights.iter().sum()
    }

    /// True when every row carries the same label (vacuously true if empty).
    pub fn is_single_class(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] == w[1])
    }

    /// New dataset holding the given rows, in the given order, with the
    /// parent's column count.
    pub fn select_rows(&self, rows: &[usize]) -> SparseDataset {
        let mut b = DatasetBuilder::with_dims(self.n_cols);
        for &i in rows {
            let (cols, vals) = self.row(i);
            b.push_row_unchecked(self.labels[i], self.row_weights[i], cols, vals);
        }
        b.finish_unchecked()
    }

    /// Column-scaled copy: entry `(i, j)` becomes `alpha[j] * x_ij`.
    pub fn scale_columns(&self, alpha: &[f64]) -> Result<SparseDataset> {
        if alpha.len() != self.n_cols {
            return Err(Error::DimMismatch {
                expected: self.n_cols,
                found: alpha.len(),
            });
        }
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= alpha[out.col_indices[k]];
        }
        Ok(out)
    }
}

/// Incremental row-by-row constructor for [`SparseDataset`].
#[derive(Debug)]
pub struct DatasetBuilder {
    n_cols: usize,
    grow_cols: bool,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    row_weights: Vec<f64>,
}

impl DatasetBuilder {
    /// Builder with a fixed column count; rows touching a column `>= n_cols`
    /// are rejected.
    pub fn with_dims(n_cols: usize) -> Self {
        DatasetBuilder {
            n_cols,
            grow_cols: false,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
            row_weights: Vec::new(),
        }
    }

    /// Builder whose column count grows to cover the largest index seen.
    pub fn growable() -> Self {
        DatasetBuilder {
            n_cols: 0,
            grow_cols: true,
            ..DatasetBuilder::with_dims(0)
        }
    }

    /// Appends a row. `cols` must be strictly increasing; values must be
    /// finite; `label` must be ±1 and `weight` nonnegative.
    pub fn push_row(
        &mut self,
        label: f64,
        weight: f64,
        cols: &[usize],
        vals: &[f64],
    ) -> Result<()> {
        if cols.len() != vals.len() {
            return Err(Error::InvalidData(
                "column index and value slices differ in length".into(),
            ));
        }
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidData(format!(
                "label {label} is not -1 or +1"
            )));
        }
        if weight < 0.0 || !weight.is_finite() {
            return Err(Error::InvalidData(format!("bad row weight {weight}")));
        }
        let mut prev: Option<usize> = None;
        for (&c, &v) in cols.iter().zip(vals) {
            if let Some(p) = prev {
                if c <= p {
                    return Err(Error::InvalidData(
                        "column indices not strictly increasing".into(),
                    ));
                }
            }
            prev = Some(c);
            if !v.is_finite() {
                return Err(Error::InvalidData("non-finite value".into()));
            }
            if c >= self.n_cols {
                if self.grow_cols {
                    self.n_cols = c + 1;
                } else {
                    return Err(Error::DimMismatch {
                        expected: self.n_cols,
                        found: c + 1,
                    });
                }
            }
        }
        self.push_row_unchecked(label, weight, cols, vals);
        Ok(())
    }

    fn push_row_unchecked(&mut self, label: f64, weight: f64, cols: &[usize], vals: &[f64]) {
        self.col_indices.extend_from_slice(cols);
        self.values.extend_from_slice(vals);
        self.row_offsets.push(self.col_indices.len());
        self.labels.push(label);
        self.row_weights.push(weight);
    }

    /// Raises the column count (no-op if already at least `n_cols`).
    pub fn ensure_cols(&mut self, n_cols: usize) {
        if n_cols > self.n_cols {
            self.n_cols = n_cols;
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn finish(self) -> Result<SparseDataset> {
        let ds = self.finish_unchecked();
        ds.validate()?;
        Ok(ds)
    }

    fn finish_unchecked(self) -> SparseDataset {
        SparseDataset {
            n_rows: self.labels.len(),
            n_cols: self.n_cols,
            row_offsets: self.row_offsets,
            col_indices: self.col_indices,
            values: self.values,
            labels: self.labels,
            row_weights: self.row_weights,
        }
    }
}
