//! Model evaluation.

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::objective::ModelVector;

/// Fraction of rows whose label matches `sign(w'x + b)`. A zero score
/// predicts +1, so ties are counted for the positive class.
pub fn accuracy(test: &SparseDataset, model: &ModelVector) -> Result<f64> {
    if model.dim() != test.n_cols() {
        return Err(Error::DimMismatch {
            expected: test.n_cols(),
            found: model.dim(),
        });
    }
    if test.n_rows() == 0 {
        return Err(Error::InvalidData("empty test set".into()));
    }
    let mut correct = 0usize;
    for i in 0..test.n_rows() {
        let (cols, vals) = test.row(i);
        let pred = if model.score(cols, vals) >= 0.0 { 1.0 } else { -1.0 };
        if pred == test.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n_rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetBuilder, SparseDataset};

    #[test]
    fn counts_ties_as_positive() {
        let mut b = DatasetBuilder::with_dims(1);
        b.push_row(1.0, 1.0, &[], &[]).unwrap(); // score 0 -> predicted +1
        b.push_row(-1.0, 1.0, &[], &[]).unwrap(); // score 0 -> wrong
        b.push_row(-1.0, 1.0, &[0], &[-1.0]).unwrap();
        let ds = b.finish().unwrap();
        let acc = accuracy(&ds, &ModelVector::new(vec![1.0])).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let ds = SparseDataset::empty(2);
        assert!(accuracy(&ds, &ModelVector::zeros(2)).is_err());
        let mut b = DatasetBuilder::with_dims(2);
        b.push_row(1.0, 1.0, &[0], &[1.0]).unwrap();
        let ds = b.finish().unwrap();
        assert!(accuracy(&ds, &ModelVector::zeros(3)).is_err());
    }
}
