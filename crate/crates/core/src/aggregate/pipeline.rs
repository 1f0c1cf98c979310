//! End-to-end distributed runs: partition the data, solve per partition on
//! a worker pool, move centroids/models/scales through the collectives, and
//! merge. Every random draw is seeded from `MethodSpec::seed`, and worker
//! closures read only their own partition plus barrier-delivered messages,
//! so outputs are bit-identical across pool sizes.

use std::time::Instant;

use crate::centroid::{augment_partition, compute_centroids};
use crate::data::{partition, subsample, SparseDataset};
use crate::error::{Error, Result};
use crate::objective::{ModelVector, Penalty};
use crate::solver::{solve_glmnet, SolverConfig, SolverMode};

use super::{
    compute_feature_weights, naive_average, owa_merge, Diagnostics, Exchange, MergePolicy,
    Method, MethodSpec, ModelMatrix, PipelineOutput, Round, RunTimings, WorkerPool,
};

/// Salts decorrelate the pipeline's independent draws (merge-set sampling,
/// CV folds) from the partition assignment, which uses the seed directly.
/// Both are method-independent so merge-stage randomness matches across
/// methods at a fixed seed.
const MERGE_SET_SALT: u64 = 0x243f_6a88_85a3_08d3;
const CV_SALT: u64 = 0x1319_8a2e_0370_7344;

/// Merge-set row count under the sampled policy: min(n/p, pn/d), floored
/// at one row.
fn merge_set_size(n: usize, d: usize, p: usize) -> usize {
    (n / p).min(p.saturating_mul(n) / d.max(1)).max(1)
}

/// Per-partition solves always run in relaxed mode for the two-round
/// methods; a full-mode caller keeps its penalty and sweep order.
fn relaxed_round_cfg(base: &SolverConfig) -> SolverConfig {
    match base.mode {
        SolverMode::Relaxed => base.clone(),
        SolverMode::Full => SolverConfig {
            sweep: base.sweep,
            ..SolverConfig::relaxed(base.penalty.clone())
        },
    }
}

fn solve_partitions(
    pool: &WorkerPool,
    parts: &[SparseDataset],
    cfg: &SolverConfig,
) -> Result<Vec<ModelVector>> {
    pool.run(parts.len(), |i| Ok(solve_glmnet(&parts[i], cfg, None)?.model))
        .into_iter()
        .collect()
}

/// Round-2 solves: same data, penalty rescaled per feature by the
/// broadcast alpha. Each worker uses its own delivered copy.
fn solve_reweighted(
    pool: &WorkerPool,
    parts: &[SparseDataset],
    cfg: &SolverConfig,
    alphas: &[Vec<f64>],
) -> Result<Vec<ModelVector>> {
    pool.run(parts.len(), |i| {
        let mut cfg = cfg.clone();
        cfg.penalty = Penalty::with_scale(
            cfg.penalty.lambda1,
            cfg.penalty.lambda2,
            alphas[i].clone(),
        );
        Ok(solve_glmnet(&parts[i], &cfg, None)?.model)
    })
    .into_iter()
    .collect()
}

fn build_merge_set(
    ds: &SparseDataset,
    parts: &[SparseDataset],
    spec: &MethodSpec,
) -> Result<SparseDataset> {
    match spec.merge_set_policy {
        MergePolicy::MainPartition => Ok(parts[0].clone()),
        MergePolicy::PaperMin => {
            let size = merge_set_size(ds.n_rows(), ds.n_cols(), spec.p);
            subsample(ds, size, spec.seed ^ MERGE_SET_SALT)
        }
    }
}

/// Runs the configured method once and reports the merged model, stage
/// timings, and run diagnostics.
///
/// All methods share the same seeded partition assignment. The two-round
/// methods run their partition solves in relaxed mode regardless of
/// `solver_cfg.mode`; single-round methods (naive, owa) solve with the
/// caller's configuration unchanged. `threads` caps the worker pool; any
/// value yields bit-identical output.
pub fn run_pipeline(
    ds: &SparseDataset,
    spec: &MethodSpec,
    solver_cfg: &SolverConfig,
    threads: usize,
) -> Result<PipelineOutput> {
    let run_start = Instant::now();
    spec.validate()?;
    solver_cfg.validate(ds.n_cols())?;
    if solver_cfg.penalty.feature_scale.is_some() {
        return Err(Error::InvalidConfig(
            "pipeline solves derive feature scales internally; pass an unscaled penalty".into(),
        ));
    }

    let plan = partition(ds, spec.p, spec.seed)?;
    let p = spec.p;
    let parts: Vec<SparseDataset> = (0..p).map(|i| plan.extract(ds, i)).collect();
    let single_class_partitions: Vec<usize> =
        (0..p).filter(|&i| parts[i].is_single_class()).collect();
    for &i in &single_class_partitions {
        log::warn!("partition {i} holds a single class");
    }

    let pool = WorkerPool::new(threads);
    let mut exchange = Exchange::new();
    let mut timings = RunTimings::default();

    let two_round = matches!(
        spec.method,
        Method::Acowa | Method::AcowaCentroidOnly | Method::AcowaFwOnly
    );
    let round_cfg = if two_round {
        relaxed_round_cfg(solver_cfg)
    } else {
        solver_cfg.clone()
    };

    // Round 1. The centroid-augmented variants rebuild their partitions
    // with every other worker's class centroids appended; the augmented
    // copies are kept because round 2 solves the same data.
    let round1_parts: Vec<SparseDataset>;
    if two_round && spec.method != Method::AcowaFwOnly {
        let t = Instant::now();
        let summaries = pool.run(p, |i| compute_centroids(&parts[i], i));
        timings.centroids = t.elapsed();

        let t = Instant::now();
        let inboxes = exchange.all_to_all_centroids(&summaries)?;
        timings.all_to_all = t.elapsed();

        let t = Instant::now();
        round1_parts = pool
            .run(p, |i| augment_partition(&parts[i], &inboxes[i], i))
            .into_iter()
            .collect::<Result<_>>()?;
        timings.round1 = t.elapsed();
    } else {
        round1_parts = parts.clone();
    }

    let t = Instant::now();
    let models1 = solve_partitions(&pool, &round1_parts, &round_cfg)?;
    timings.round1 += t.elapsed();

    let t = Instant::now();
    let gathered1 = exchange.gather_models(&models1)?;
    timings.gather1 = t.elapsed();

    // Round 2 for the feature-reweighted variants: support fractions from
    // the gathered round-1 models set the per-feature penalty scales.
    let matrix = if matches!(spec.method, Method::Acowa | Method::AcowaFwOnly) {
        let round1_matrix = ModelMatrix {
            columns: gathered1,
            source_round: Round::Round1,
        };
        let t = Instant::now();
        let weights = compute_feature_weights(&round1_matrix, spec.beta)?;
        let alphas = exchange.broadcast_scale(&weights.alpha, p)?;
        timings.alpha = t.elapsed();

        let t = Instant::now();
        let models2 = solve_reweighted(&pool, &round1_parts, &round_cfg, &alphas)?;
        timings.round2 = t.elapsed();

        let t = Instant::now();
        let gathered2 = exchange.gather_models(&models2)?;
        timings.gather2 = t.elapsed();
        ModelMatrix {
            columns: gathered2,
            source_round: Round::Round2,
        }
    } else {
        ModelMatrix {
            columns: gathered1,
            source_round: Round::Round1,
        }
    };

    // Merge. Naive averages coefficients directly; everything else fits
    // combination weights on the merge set.
    let t = Instant::now();
    let (merged, chosen_lambda_cv, merge_set_rows) = if spec.method == Method::Naive {
        (naive_average(&matrix)?, None, 0)
    } else {
        let merge_set = build_merge_set(ds, &parts, spec)?;
        let (merged, lambda) = owa_merge(
            &merge_set,
            &matrix,
            &spec.lambda_cv_grid,
            spec.cv_folds,
            spec.seed ^ CV_SALT,
        )?;
        (merged, Some(lambda), merge_set.n_rows())
    };
    timings.merge = t.elapsed();

    timings.total = run_start.elapsed();
    let diagnostics = Diagnostics {
        final_nnz: merged.nnz(),
        partition_nnz: matrix.columns.iter().map(ModelVector::nnz).collect(),
        chosen_lambda_cv,
        counters: exchange.counters,
        single_class_partitions,
        merge_set_rows,
    };
    Ok(PipelineOutput {
        model: merged,
        timings,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_sparse;
    use crate::eval::accuracy;
    use crate::solver::SweepOrder;

    fn penalty() -> Penalty {
        Penalty::new(0.05, 0.01)
    }

    fn spec(method: Method, p: usize, seed: u64) -> MethodSpec {
        let mut s = MethodSpec::new(method, p, seed);
        // Small grids keep the merge-stage CV cheap in unit tests.
        s.lambda_cv_grid = vec![1e-3, 1e-1, 1e1];
        s.cv_folds = 3;
        s
    }

    #[test]
    fn p1_naive_equals_direct_solve_exactly() {
        let (ds, _) = synth_sparse(120, 12, 0.4, 4, 21).unwrap();
        let cfg = SolverConfig::full(penalty());
        let direct = solve_glmnet(&ds, &cfg, None).unwrap().model;
        let out = run_pipeline(&ds, &spec(Method::Naive, 1, 21), &cfg, 1).unwrap();
        assert_eq!(out.model.coefficients, direct.coefficients);
        assert_eq!(out.diagnostics.partition_nnz, vec![direct.nnz()]);
        assert!(out.diagnostics.chosen_lambda_cv.is_none());
    }

    #[test]
    fn p1_two_round_run_reduces_structurally() {
        let (ds, _) = synth_sparse(80, 10, 0.5, 3, 5).unwrap();
        let cfg = SolverConfig::relaxed(penalty());
        let out = run_pipeline(&ds, &spec(Method::Acowa, 1, 5), &cfg, 2).unwrap();
        let c = out.diagnostics.counters;
        assert_eq!(c.all_to_all_rounds, 1);
        assert_eq!(c.all_to_all_messages, 0);
        assert_eq!(c.gather_rounds, 2);
        assert_eq!(c.gather_messages, 2);
        assert_eq!(c.broadcast_rounds, 1);
        assert_eq!(out.model.dim(), ds.n_cols());
        assert!(out.diagnostics.chosen_lambda_cv.is_some());
        // Single worker: the merge set is the whole dataset.
        assert_eq!(out.diagnostics.merge_set_rows, ds.n_rows());
    }

    #[test]
    fn owa_equals_reweighted_variant_at_beta_zero() {
        let (ds, _) = synth_sparse(240, 16, 0.3, 5, 77).unwrap();
        let cfg = SolverConfig::relaxed(penalty());
        let owa = run_pipeline(&ds, &spec(Method::Owa, 4, 9), &cfg, 3).unwrap();
        let mut fw = spec(Method::AcowaFwOnly, 4, 9);
        fw.beta = 0.0;
        let fw = run_pipeline(&ds, &fw, &cfg, 3).unwrap();
        // beta = 0 makes every alpha exactly 1, so round 2 repeats round 1
        // bit for bit and the merge sees identical inputs.
        assert_eq!(owa.model.coefficients, fw.model.coefficients);
    }

    #[test]
    fn outputs_are_identical_across_pool_sizes() {
        let (ds, _) = synth_sparse(200, 15, 0.4, 4, 33).unwrap();
        let cfg = SolverConfig::relaxed(penalty());
        for method in [Method::Acowa, Method::Naive] {
            let runs: Vec<Vec<f64>> = [1, 2, 5]
                .into_iter()
                .map(|threads| {
                    run_pipeline(&ds, &spec(method, 5, 13), &cfg, threads)
                        .unwrap()
                        .model
                        .coefficients
                })
                .collect();
            assert_eq!(runs[0], runs[1]);
            assert_eq!(runs[0], runs[2]);
        }
    }

    #[test]
    fn collective_counts_per_method() {
        let (ds, _) = synth_sparse(160, 12, 0.4, 4, 51).unwrap();
        let cfg = SolverConfig::relaxed(penalty());
        let p = 4;

        let naive = run_pipeline(&ds, &spec(Method::Naive, p, 1), &cfg, 2).unwrap();
        let c = naive.diagnostics.counters;
        assert_eq!(
            (c.all_to_all_rounds, c.gather_rounds, c.broadcast_rounds),
            (0, 1, 0)
        );
        assert_eq!(c.gather_messages, p);

        let owa = run_pipeline(&ds, &spec(Method::Owa, p, 1), &cfg, 2).unwrap();
        let c = owa.diagnostics.counters;
        assert_eq!(
            (c.all_to_all_rounds, c.gather_rounds, c.broadcast_rounds),
            (0, 1, 0)
        );

        let acowa = run_pipeline(&ds, &spec(Method::Acowa, p, 1), &cfg, 2).unwrap();
        let c = acowa.diagnostics.counters;
        assert_eq!(c.all_to_all_rounds, 1);
        assert_eq!(c.all_to_all_messages, p * (p - 1));
        assert_eq!(c.gather_rounds, 2);
        assert_eq!(c.gather_messages, 2 * p);
        assert_eq!(c.broadcast_rounds, 1);
        assert_eq!(c.broadcast_messages, p);
        assert!(c.bytes_sent > 0);

        let centroid_only =
            run_pipeline(&ds, &spec(Method::AcowaCentroidOnly, p, 1), &cfg, 2).unwrap();
        let c = centroid_only.diagnostics.counters;
        assert_eq!(
            (c.all_to_all_rounds, c.gather_rounds, c.broadcast_rounds),
            (1, 1, 0)
        );

        let fw_only = run_pipeline(&ds, &spec(Method::AcowaFwOnly, p, 1), &cfg, 2).unwrap();
        let c = fw_only.diagnostics.counters;
        assert_eq!(
            (c.all_to_all_rounds, c.gather_rounds, c.broadcast_rounds),
            (0, 2, 1)
        );
    }

    #[test]
    fn sampled_merge_policy_size_is_exact() {
        assert_eq!(merge_set_size(100, 10, 2), 20);
        assert_eq!(merge_set_size(20000, 500, 16), 640);
        assert_eq!(merge_set_size(20000, 500, 64), 312);
        assert_eq!(merge_set_size(100, 10, 10), 10);
        assert_eq!(merge_set_size(5, 1000, 5), 1);

        let (ds, _) = synth_sparse(100, 10, 0.5, 3, 2).unwrap();
        let mut s = spec(Method::Owa, 2, 6);
        s.merge_set_policy = MergePolicy::PaperMin;
        let cfg = SolverConfig::relaxed(penalty());
        let out = run_pipeline(&ds, &s, &cfg, 1).unwrap();
        assert_eq!(out.diagnostics.merge_set_rows, 20);
    }

    #[test]
    fn two_round_methods_accept_a_full_mode_caller() {
        let (ds, _) = synth_sparse(90, 8, 0.5, 3, 14).unwrap();
        let cfg = SolverConfig::full(penalty());
        let out = run_pipeline(&ds, &spec(Method::Acowa, 3, 2), &cfg, 1).unwrap();
        assert!(out.model.dim() == 8);
        // Shuffled sweeps stay deterministic through the pipeline.
        let mut shuffled = cfg.clone();
        shuffled.sweep = SweepOrder::Shuffled { seed: 4 };
        let a = run_pipeline(&ds, &spec(Method::Acowa, 3, 2), &shuffled, 1).unwrap();
        let b = run_pipeline(&ds, &spec(Method::Acowa, 3, 2), &shuffled, 3).unwrap();
        assert_eq!(a.model.coefficients, b.model.coefficients);
    }

    #[test]
    fn rejects_bad_configurations() {
        let (ds, _) = synth_sparse(30, 6, 0.5, 2, 8).unwrap();
        let cfg = SolverConfig::relaxed(penalty());
        let mut bad = spec(Method::Acowa, 2, 0);
        bad.beta = -1.0;
        assert!(run_pipeline(&ds, &bad, &cfg, 1).is_err());
        assert!(run_pipeline(&ds, &spec(Method::Owa, 31, 0), &cfg, 1).is_err());
        let scaled = SolverConfig::relaxed(Penalty::with_scale(0.1, 0.0, vec![1.0; 6]));
        assert!(run_pipeline(&ds, &spec(Method::Owa, 2, 0), &scaled, 1).is_err());
    }

    #[test]
    fn distributed_models_still_learn() {
        let (ds, w) = synth_sparse(600, 20, 0.3, 5, 91).unwrap();
        let test = crate::data::synth_with_model(400, 0.3, &w, 92).unwrap();
        let cfg = SolverConfig::relaxed(Penalty::new(0.02, 0.0));
        for method in Method::all() {
            let out = run_pipeline(&ds, &spec(method, 4, 17), &cfg, 2).unwrap();
            let acc = accuracy(&test, &out.model).unwrap();
            assert!(acc > 0.7, "{} reached only {acc}", method.name());
        }
    }
}
