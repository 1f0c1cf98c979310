//! LIBSVM text format.
//!
//! Each line is `label idx:val idx:val ...` with 1-based, strictly
//! increasing indices. Indices are stored 0-based in memory. Labels are
//! accepted as {0, 1} or {-1, +1} and normalized to {-1, +1} by sign
//! (0 maps to -1). Duplicate indices within a row are a parse error rather
//! than being merged.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::{DatasetBuilder, SparseDataset};

/// Parses a LIBSVM text stream.
///
/// The resulting dimension is the larger of `expected_dims` (when given) and
/// the largest index seen. An index above `expected_dims` is a dimension
/// error carrying the offending line number. Blank lines are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R, expected_dims: Option<usize>) -> Result<SparseDataset> {
    let mut builder = DatasetBuilder::growable();
    if let Some(d) = expected_dims {
        builder.ensure_cols(d);
    }

    let mut cols: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        let mut fields = line.split_ascii_whitespace();
        let label_text = fields.next().expect("non-empty line has a first field");
        let raw_label: f64 = label_text.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("label `{label_text}` is not numeric"),
        })?;
        let label = if raw_label > 0.0 { 1.0 } else { -1.0 };

        cols.clear();
        vals.clear();
        for field in fields {
            let (idx_text, val_text) = field.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("feature `{field}` is not in idx:val form"),
            })?;
            let idx: usize = idx_text.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("index `{idx_text}` is not a positive integer"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "indices are 1-based; found index 0".into(),
                });
            }
            let val: f64 = val_text.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("value `{val_text}` is not numeric"),
            })?;
            if let Some(d) = expected_dims {
                if idx > d {
                    return Err(Error::IndexOutOfRange {
                        line: lineno,
                        index: idx,
                        dims: d,
                    });
                }
            }
            if let Some(&prev) = cols.last() {
                if idx - 1 <= prev {
                    let what = if idx - 1 == prev { "duplicate" } else { "decreasing" };
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("{what} index {idx} within row"),
                    });
                }
            }
            cols.push(idx - 1);
            vals.push(val);
        }

        builder
            .push_row(label, 1.0, &cols, &vals)
            .map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
    }

    builder.finish()
}

/// Writes a dataset in LIBSVM text form (1-based indices).
///
/// Values are printed with Rust's shortest round-trip float formatting, so
/// reparsing reproduces them exactly.
pub fn write_libsvm<W: Write>(ds: &SparseDataset, mut writer: W) -> Result<()> {
    for i in 0..ds.n_rows() {
        let label = if ds.label(i) > 0.0 { "+1" } else { "-1" };
        write!(writer, "{label}")?;
        let (cols, vals) = ds.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            write!(writer, " {}:{}", c + 1, v)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
