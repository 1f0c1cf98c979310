//! Random balanced partitioning and subsampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::SparseDataset;

/// Assignment of every row to one of `p` partitions.
///
/// Assignment is shuffled round-robin: a seeded permutation of the rows is
/// dealt out cyclically, so partition sizes differ by at most one and every
/// partition is nonempty when `n_rows >= p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    p: usize,
    assignment: Vec<usize>,
    seed: u64,
}

impl PartitionPlan {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Partition id of each row.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Row ids of partition `i`, in original row order.
    pub fn rows_of(&self, i: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(row, &part)| (part == i).then_some(row))
            .collect()
    }

    /// Number of rows in each partition.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.p];
        for &part in &self.assignment {
            sizes[part] += 1;
        }
        sizes
    }

    /// Materializes partition `i` as a dataset with the parent's dimension.
    pub fn extract(&self, ds: &SparseDataset, i: usize) -> SparseDataset {
        ds.select_rows(&self.rows_of(i))
    }
}

/// Uniformly random balanced assignment of rows to `p` partitions.
/// Deterministic for a fixed seed.
pub fn partition(ds: &SparseDataset, p: usize, seed: u64) -> Result<PartitionPlan> {
    if p == 0 {
        return Err(Error::InvalidPartition("p must be at least 1".into()));
    }
    if p > ds.n_rows() {
        return Err(Error::InvalidPartition(format!(
            "p = {} exceeds n_rows = {}",
            p,
            ds.n_rows()
        )));
    }
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut assignment = vec![0; ds.n_rows()];
    for (k, &row) in order.iter().enumerate() {
        assignment[row] = k % p;
    }
    Ok(PartitionPlan { p, assignment, seed })
}

/// Uniform sample of `size` rows without replacement, deterministic per
/// seed. A request above `n_rows` is clamped with a logged warning.
pub fn subsample(ds: &SparseDataset, size: usize, seed: u64) -> Result<SparseDataset> {
    if size == 0 {
        return Err(Error::InvalidPartition(
            "subsample size must be positive".into(),
        ));
    }
    let size = if size > ds.n_rows() {
        log::warn!(
            "subsample size {} exceeds n_rows {}; clamping",
            size,
            ds.n_rows()
        );
        ds.n_rows()
    } else {
        size
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rand::seq::index::sample(&mut rng, ds.n_rows(), size).into_vec();
    Ok(ds.select_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_sparse;

    fn small() -> SparseDataset {
        synth_sparse(10, 4, 0.8, 2, 3).unwrap().0
    }

    #[test]
    fn single_partition_holds_everything() {
        let ds = small();
        let plan = partition(&ds, 1, 0).unwrap();
        assert!(plan.assignment().iter().all(|&a| a == 0));
        assert_eq!(plan.extract(&ds, 0), ds);
    }

    #[test]
    fn balanced_and_deterministic() {
        let ds = small();
        let plan = partition(&ds, 2, 42).unwrap();
        assert_eq!(plan.sizes(), vec![5, 5]);
        let again = partition(&ds, 2, 42).unwrap();
        assert_eq!(plan, again);
        let other = partition(&ds, 2, 43).unwrap();
        assert_ne!(plan.assignment(), other.assignment());
    }

    #[test]
    fn partitions_are_disjoint_and_cover() {
        let ds = small();
        let plan = partition(&ds, 3, 7).unwrap();
        let mut seen = vec![false; ds.n_rows()];
        for i in 0..3 {
            for row in plan.rows_of(i) {
                assert!(!seen[row]);
                seen[row] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let sizes = plan.sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(plan.extract(&ds, 1).n_cols(), ds.n_cols());
    }

    #[test]
    fn too_many_partitions_is_an_error() {
        let ds = small();
        assert!(partition(&ds, 11, 0).is_err());
        assert!(partition(&ds, 0, 0).is_err());
    }

    #[test]
    fn full_subsample_is_a_permutation() {
        let ds = small();
        let sub = subsample(&ds, ds.n_rows(), 5).unwrap();
        assert_eq!(sub.n_rows(), ds.n_rows());
        assert_eq!(sub.nnz(), ds.nnz());
        let mut original: Vec<f64> = (0..ds.n_rows()).map(|i| ds.row(i).1.iter().sum()).collect();
        let mut sampled: Vec<f64> = (0..sub.n_rows()).map(|i| sub.row(i).1.iter().sum()).collect();
        original.sort_by(f64::total_cmp);
        sampled.sort_by(f64::total_cmp);
        assert_eq!(original, sampled);
    }

    #[test]
    fn subsample_is_deterministic_and_clamps() {
        let ds = small();
        let a = subsample(&ds, 4, 9).unwrap();
        let b = subsample(&ds, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 4);
        let clamped = subsample(&ds, 100, 9).unwrap();
        assert_eq!(clamped.n_rows(), 10);
        assert!(subsample(&ds, 0, 9).is_err());
    }
}
