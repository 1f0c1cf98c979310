//! Model combination: plain averaging, the weighted-average merge fit on a
//! small held-in set, and the between-rounds feature weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetBuilder, SparseDataset};
use crate::error::{Error, Result};
use crate::objective::{logistic_loss, ModelVector, Penalty};
use crate::solver::{solve_glmnet, SolverConfig};

use super::{FeatureWeights, ModelMatrix};

/// Unweighted mean of the partition models.
pub fn naive_average(models: &ModelMatrix) -> Result<ModelVector> {
    models.validate()?;
    let d = models.dim();
    let p = models.p() as f64;
    let mut mean = vec![0.0; d];
    for col in &models.columns {
        for (j, &v) in col.coefficients.iter().enumerate() {
            mean[j] += v;
        }
    }
    for v in &mut mean {
        *v /= p;
    }
    Ok(ModelVector::new(mean))
}

/// Scores of every model on every merge-set row: entry `[i][j]` is
/// `w_j' x_i`.
pub fn project_models(merge_set: &SparseDataset, models: &ModelMatrix) -> Result<Vec<Vec<f64>>> {
    models.validate()?;
    if models.dim() != merge_set.n_cols() {
        return Err(Error::DimMismatch {
            expected: merge_set.n_cols(),
            found: models.dim(),
        });
    }
    let p = models.p();
    let mut out = vec![vec![0.0; p]; merge_set.n_rows()];
    for (j, col) in models.columns.iter().enumerate() {
        let w = &col.coefficients;
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = merge_set.row(i);
            row[j] = cols.iter().zip(vals).map(|(&k, &v)| v * w[k]).sum();
        }
    }
    Ok(out)
}

/// Fraction of models with a nonzero coefficient per feature, and the
/// resulting penalty scales `alpha_j = 1 + beta * P_j`.
pub fn compute_feature_weights(models: &ModelMatrix, beta: f64) -> Result<FeatureWeights> {
    models.validate()?;
    let d = models.dim();
    let p = models.p() as f64;
    let mut support_fraction = vec![0.0; d];
    for col in &models.columns {
        for (j, &v) in col.coefficients.iter().enumerate() {
            if v != 0.0 {
                support_fraction[j] += 1.0;
            }
        }
    }
    for f in &mut support_fraction {
        *f /= p;
    }
    let alpha = support_fraction.iter().map(|&f| 1.0 + beta * f).collect();
    Ok(FeatureWeights {
        alpha,
        beta,
        support_fraction,
    })
}

/// The projected merge problem as a dataset: p dense feature columns, the
/// merge set's labels and weights.
fn projected_dataset(merge_set: &SparseDataset, scores: &[Vec<f64>], p: usize) -> Result<SparseDataset> {
    let cols: Vec<usize> = (0..p).collect();
    let mut b = DatasetBuilder::with_dims(p);
    for (i, row) in scores.iter().enumerate() {
        b.push_row(merge_set.label(i), merge_set.row_weight(i), &cols, row)?;
    }
    b.finish()
}

/// One ridge-logistic fit of the projected problem. The score columns are
/// usually near-collinear (every partition model predicts roughly alike),
/// so the fit gets a bounded iteration budget instead of full mode's
/// defaults; at small ridge strengths chasing the last digits of such an
/// ill-conditioned problem costs seconds and moves the predictions by
/// nothing.
fn ridge_fit(ds: &SparseDataset, lambda: f64, warm: Option<&ModelVector>) -> Result<ModelVector> {
    let mut cfg = SolverConfig::full(Penalty::new(0.0, lambda));
    cfg.max_outer = 30;
    cfg.max_inner = 100;
    Ok(solve_glmnet(ds, &cfg, warm)?.model)
}

/// Learns combination weights `v` for the partition models by ridge
/// logistic regression on their merge-set scores, choosing the ridge
/// strength by k-fold cross-validation (ties go to the smallest value),
/// then returns the combined model `W v` and the chosen strength.
///
/// Folds whose training part is empty or single-class are skipped; if every
/// fold is degenerate the fit falls back to the grid median without CV.
pub fn owa_merge(
    merge_set: &SparseDataset,
    models: &ModelMatrix,
    lambda_cv_grid: &[f64],
    cv_folds: usize,
    seed: u64,
) -> Result<(ModelVector, f64)> {
    if merge_set.n_rows() == 0 {
        return Err(Error::EmptyMergeSet);
    }
    if lambda_cv_grid.is_empty() {
        return Err(Error::InvalidConfig("empty lambda_cv grid".into()));
    }
    if cv_folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "cv_folds must be at least 2, got {cv_folds}"
        )));
    }
    let p = models.p();
    let scores = project_models(merge_set, models)?;
    let projected = projected_dataset(merge_set, &scores, p)?;

    let mut grid: Vec<f64> = lambda_cv_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    if !grid.iter().all(|&l| l.is_finite() && l >= 0.0) {
        return Err(Error::InvalidConfig(
            "lambda_cv grid must be nonnegative and finite".into(),
        ));
    }

    let n = projected.n_rows();
    let folds = cv_folds.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut fold_losses = vec![0.0f64; grid.len()];
    let mut usable_folds = 0usize;
    for k in 0..folds {
        let val_rows: Vec<usize> = order.iter().copied().skip(k).step_by(folds).collect();
        let train_rows: Vec<usize> = order
            .iter()
            .copied()
            .enumerate()
            .filter_map(|(pos, row)| (pos % folds != k).then_some(row))
            .collect();
        if train_rows.is_empty() || val_rows.is_empty() {
            continue;
        }
        let train = projected.select_rows(&train_rows);
        if train.is_single_class() {
            log::debug!("cv fold {k} is single-class; skipped");
            continue;
        }
        let val = projected.select_rows(&val_rows);
        let val_weight = val.total_weight();
        // Fit strongest ridge first and warm-start down the grid; the
        // solution path is continuous in lambda.
        let mut warm: Option<ModelVector> = None;
        for (gi, &lambda) in grid.iter().enumerate().rev() {
            let v = ridge_fit(&train, lambda, warm.as_ref())?;
            fold_losses[gi] += logistic_loss(&val, &v)? / val_weight;
            warm = Some(v);
        }
        usable_folds += 1;
    }

    let chosen = if usable_folds == 0 {
        let median = grid[(grid.len() - 1) / 2];
        log::warn!("all cv folds degenerate; fitting with grid median {median}");
        median
    } else {
        let mut best = 0usize;
        for gi in 1..grid.len() {
            if fold_losses[gi] < fold_losses[best] {
                best = gi;
            }
        }
        grid[best]
    };

    let v = ridge_fit(&projected, chosen, None)?;
    let mut combined = vec![0.0; models.dim()];
    for (j, col) in models.columns.iter().enumerate() {
        let vj = v.coefficients[j];
        if vj != 0.0 {
            for (k, &w) in col.coefficients.iter().enumerate() {
                combined[k] += vj * w;
            }
        }
    }
    Ok((ModelVector::new(combined), chosen))
}
