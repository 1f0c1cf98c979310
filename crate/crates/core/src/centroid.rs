//! Class centroids, partition augmentation, and the Jensen-gap bound that
//! justifies replacing a crowd of points by one weighted centroid.

use crate::data::{DatasetBuilder, SparseDataset};
use crate::error::{Error, Result};
use crate::objective::{log1p_exp_neg, ModelVector};

/// Per-partition class means with their point counts. An empty class is a
/// flagged state (zero vector, mass 0), not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSummary {
    pub partition_id: usize,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub mass_plus: u64,
    pub mass_minus: u64,
    pub valid_plus: bool,
    pub valid_minus: bool,
}

impl CentroidSummary {
    pub fn dim(&self) -> usize {
        self.mu_plus.len()
    }
}

/// Arithmetic mean of each class's rows. Counts, not row weights, define
/// the mass: the pipeline always runs this on unit-weight partition rows.
pub fn compute_centroids(part: &SparseDataset, partition_id: usize) -> CentroidSummary {
    let d = part.n_cols();
    let mut mu_plus = vec![0.0; d];
    let mut mu_minus = vec![0.0; d];
    let mut n_plus = 0u64;
    let mut n_minus = 0u64;
    for i in 0..part.n_rows() {
        let (cols, vals) = part.row(i);
        let (mu, count) = if part.label(i) > 0.0 {
            (&mut mu_plus, &mut n_plus)
        } else {
            (&mut mu_minus, &mut n_minus)
        };
        *count += 1;
        for (&j, &v) in cols.iter().zip(vals) {
            mu[j] += v;
        }
    }
    if n_plus > 0 {
        for v in &mut mu_plus {
            *v /= n_plus as f64;
        }
    }
    if n_minus > 0 {
        for v in &mut mu_minus {
            *v /= n_minus as f64;
        }
    }
    CentroidSummary {
        partition_id,
        mu_plus,
        mu_minus,
        mass_plus: n_plus,
        mass_minus: n_minus,
        valid_plus: n_plus > 0,
        valid_minus: n_minus > 0,
    }
}

fn push_centroid(builder: &mut DatasetBuilder, mu: &[f64], label: f64, mass: u64) -> Result<()> {
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (j, &v) in mu.iter().enumerate() {
        if v != 0.0 {
            cols.push(j);
            vals.push(v);
        }
    }
    builder.push_row(label, mass as f64, &cols, &vals)
}

/// The partition plus every other partition's class centroids, each
/// appended as one row weighted by its class count. Centroids are appended
/// in ascending partition-id order; invalid (empty-class) centroids are
/// skipped with a logged event.
pub fn augment_partition(
    part: &SparseDataset,
    all_centroids: &[CentroidSummary],
    self_id: usize,
) -> Result<SparseDataset> {
    let d = part.n_cols();
    if !all_centroids.iter().any(|c| c.partition_id == self_id) {
        return Err(Error::InvalidData(format!(
            "self partition {self_id} missing from centroid set"
        )));
    }
    for c in all_centroids {
        if c.dim() != d || c.mu_minus.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                found: c.dim(),
            });
        }
    }
    let mut by_id: Vec<&CentroidSummary> =
        all_centroids.iter().filter(|c| c.partition_id != self_id).collect();
    by_id.sort_by_key(|c| c.partition_id);

    let mut builder = DatasetBuilder::with_dims(d);
    for i in 0..part.n_rows() {
        let (cols, vals) = part.row(i);
        builder.push_row(part.label(i), part.row_weight(i), cols, vals)?;
    }
    for c in by_id {
        if c.valid_plus {
            push_centroid(&mut builder, &c.mu_plus, 1.0, c.mass_plus)?;
        } else {
            log::debug!("partition {}: no positive centroid", c.partition_id);
        }
        if c.valid_minus {
            push_centroid(&mut builder, &c.mu_minus, -1.0, c.mass_minus)?;
        } else {
            log::debug!("partition {}: no negative centroid", c.partition_id);
        }
    }
    builder.finish()
}

/// Jensen gap of the logistic loss on a single-class set against the loss
/// of its (weighted) centroid, with the matching curvature bound:
/// `0 <= gap <= (W/8) * Var(Z)` where `Z_i = -y w'x_i`, the mean and
/// variance are row-weight normalized, and `W` is the total weight. With
/// unit weights this is exactly the count-based statement.
pub fn centroid_loss_gap(part: &SparseDataset, w: &ModelVector) -> Result<(f64, f64)> {
    if w.dim() != part.n_cols() {
        return Err(Error::DimMismatch {
            expected: part.n_cols(),
            found: w.dim(),
        });
    }
    if part.n_rows() == 0 {
        return Err(Error::InvalidData("empty set has no centroid loss".into()));
    }
    if !part.is_single_class() {
        return Err(Error::MixedLabels);
    }
    let y = part.label(0);
    let n = part.n_rows();
    let mut z = Vec::with_capacity(n);
    let mut total_w = 0.0;
    let mut z_mean = 0.0;
    for i in 0..n {
        let (cols, vals) = part.row(i);
        let zi = -y * w.score(cols, vals);
        let rw = part.row_weight(i);
        z.push(zi);
        total_w += rw;
        z_mean += rw * zi;
    }
    z_mean /= total_w;

    let mut loss = 0.0;
    let mut var = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let rw = part.row_weight(i);
        // log(1 + e^z) = log(1 + e^-(-z))
        loss += rw * log1p_exp_neg(-zi);
        var += rw * (zi - z_mean) * (zi - z_mean);
    }
    var /= total_w;

    let gap = loss - total_w * log1p_exp_neg(-z_mean);
    let bound = total_w / 8.0 * var;
    Ok((gap, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn build(rows: &[(f64, f64, Vec<usize>, Vec<f64>)], d: usize) -> SparseDataset {
        let mut b = DatasetBuilder::with_dims(d);
        for (label, weight, cols, vals) in rows {
            b.push_row(*label, *weight, cols, vals).unwrap();
        }
        b.finish().unwrap()
    }

    #[test]
    fn two_point_positive_mean() {
        let ds = build(
            &[
                (1.0, 1.0, vec![0], vec![1.0]),
                (1.0, 1.0, vec![1], vec![1.0]),
                (-1.0, 1.0, vec![0, 1], vec![3.0, 1.0]),
            ],
            2,
        );
        let c = compute_centroids(&ds, 4);
        assert_eq!(c.partition_id, 4);
        assert_eq!(c.mu_plus, vec![0.5, 0.5]);
        assert_eq!(c.mass_plus, 2);
        assert!(c.valid_plus && c.valid_minus);
        assert_eq!(c.mu_minus, vec![3.0, 1.0]);
        assert_eq!(c.mass_minus, 1);
    }

    #[test]
    fn empty_class_is_flagged() {
        let ds = build(&[(-1.0, 1.0, vec![0], vec![2.0])], 1);
        let c = compute_centroids(&ds, 0);
        assert!(!c.valid_plus);
        assert_eq!(c.mass_plus, 0);
        assert_eq!(c.mu_plus, vec![0.0]);
        assert!(c.valid_minus);
        assert_eq!(c.mu_minus, vec![2.0]);
    }

    #[test]
    fn augment_with_only_self_is_identity() {
        let ds = build(
            &[
                (1.0, 1.0, vec![0], vec![1.0]),
                (-1.0, 1.0, vec![1], vec![-1.0]),
            ],
            2,
        );
        let c = compute_centroids(&ds, 0);
        let aug = augment_partition(&ds, &[c], 0).unwrap();
        assert_eq!(aug, ds);
    }

    #[test]
    fn augment_appends_weighted_centroids_in_id_order() {
        let part0 = build(
            &[
                (1.0, 1.0, vec![0], vec![1.0]),
                (-1.0, 1.0, vec![1], vec![1.0]),
            ],
            2,
        );
        let part1 = build(
            &[
                (1.0, 1.0, vec![0], vec![2.0]),
                (1.0, 1.0, vec![1], vec![2.0]),
                (-1.0, 1.0, vec![0], vec![-2.0]),
            ],
            2,
        );
        let part2 = build(
            &[
                (1.0, 1.0, vec![1], vec![5.0]),
                (-1.0, 1.0, vec![0], vec![-3.0]),
                (-1.0, 1.0, vec![0], vec![-1.0]),
            ],
            2,
        );
        let summaries = vec![
            compute_centroids(&part2, 2),
            compute_centroids(&part0, 0),
            compute_centroids(&part1, 1),
        ];
        let aug = augment_partition(&part0, &summaries, 0).unwrap();
        assert_eq!(aug.n_rows(), part0.n_rows() + 4);
        // Appended rows: partition 1's +/- then partition 2's +/-.
        assert_eq!(aug.label(2), 1.0);
        assert_eq!(aug.row_weight(2), 2.0);
        assert_eq!(aug.row(2).1, &[1.0, 1.0]);
        assert_eq!(aug.label(3), -1.0);
        assert_eq!(aug.row_weight(3), 1.0);
        assert_eq!(aug.label(4), 1.0);
        assert_eq!(aug.row(4), (&[1usize][..], &[5.0][..]));
        assert_eq!(aug.label(5), -1.0);
        assert_eq!(aug.row_weight(5), 2.0);
        // Mass conservation: augmented weight equals the global row count.
        let total: f64 = (0..aug.n_rows()).map(|i| aug.row_weight(i)).sum();
        assert_eq!(total, 8.0);
    }

    #[test]
    fn augment_checks_dimensions_and_self_presence() {
        let part = build(&[(1.0, 1.0, vec![0], vec![1.0])], 1);
        let mut c = compute_centroids(&part, 0);
        assert!(augment_partition(&part, &[c.clone()], 3).is_err());
        c.mu_plus = vec![1.0, 2.0];
        c.mu_minus = vec![0.0, 0.0];
        assert!(augment_partition(&part, &[c], 0).is_err());
    }

    #[test]
    fn zero_centroid_coordinates_are_dropped() {
        let other = build(
            &[
                (1.0, 1.0, vec![0, 1], vec![1.0, 1.0]),
                (1.0, 1.0, vec![0, 1], vec![-1.0, 1.0]),
            ],
            2,
        );
        let own = build(&[(-1.0, 1.0, vec![0], vec![1.0])], 2);
        let summaries = vec![compute_centroids(&own, 0), compute_centroids(&other, 1)];
        let aug = augment_partition(&own, &summaries, 0).unwrap();
        // The appended positive centroid is (0, 1): one stored entry.
        assert_eq!(aug.row(1), (&[1usize][..], &[1.0][..]));
    }

    #[test]
    fn identical_rows_have_zero_gap_and_bound() {
        let ds = build(
            &[
                (1.0, 1.0, vec![0, 1], vec![0.3, -0.7]),
                (1.0, 1.0, vec![0, 1], vec![0.3, -0.7]),
                (1.0, 1.0, vec![0, 1], vec![0.3, -0.7]),
            ],
            2,
        );
        let w = ModelVector::new(vec![1.7, 0.4]);
        let (gap, bound) = centroid_loss_gap(&ds, &w).unwrap();
        assert!(gap.abs() < 1e-12);
        assert!(bound.abs() < 1e-12);
    }

    #[test]
    fn zero_model_has_zero_gap() {
        let ds = build(
            &[
                (-1.0, 1.0, vec![0], vec![1.0]),
                (-1.0, 1.0, vec![1], vec![2.0]),
                (-1.0, 2.0, vec![0, 1], vec![-1.0, 0.5]),
            ],
            2,
        );
        let (gap, bound) = centroid_loss_gap(&ds, &ModelVector::zeros(2)).unwrap();
        assert!(gap.abs() < 1e-12);
        assert!(bound.abs() < 1e-12);
    }

    #[test]
    fn mixed_labels_are_rejected() {
        let ds = build(
            &[
                (1.0, 1.0, vec![0], vec![1.0]),
                (-1.0, 1.0, vec![0], vec![1.0]),
            ],
            1,
        );
        match centroid_loss_gap(&ds, &ModelVector::zeros(1)) {
            Err(Error::MixedLabels) => {}
            other => panic!("expected MixedLabels, got {other:?}"),
        }
    }

    #[test]
    fn sandwich_holds_on_random_single_class_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let y = if trial % 2 == 0 { 1.0 } else { -1.0 };
            let d = 8;
            let mut b = DatasetBuilder::with_dims(d);
            for _ in 0..50 {
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                for j in 0..d {
                    if rng.gen::<f64>() < 0.5 {
                        cols.push(j);
                        vals.push(rng.gen::<f64>() * 4.0 - 2.0);
                    }
                }
                let weight = 1.0 + rng.gen::<f64>() * 3.0;
                b.push_row(y, weight, &cols, &vals).unwrap();
            }
            let ds = b.finish().unwrap();
            let w = ModelVector::new((0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect());
            let (gap, bound) = centroid_loss_gap(&ds, &w).unwrap();
            assert!(gap >= 0.0, "trial {trial}: gap {gap} negative");
            assert!(gap <= bound, "trial {trial}: gap {gap} > bound {bound}");
        }
    }
}
