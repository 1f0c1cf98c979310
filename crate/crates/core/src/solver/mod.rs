//! Solvers for the elastic-net logistic objective.
//!
//! `solve_glmnet` is the production path: proximal-Newton steps whose
//! quadratic subproblem is minimized by coordinate descent. `solve_reference`
//! is a deliberately independent proximal-gradient solver used as a
//! correctness oracle; the two share nothing but the objective evaluation.

mod glmnet;
mod reference;

use std::time::Duration;

pub use glmnet::solve_glmnet;
pub use reference::{solve_reference, solve_reference_traced};

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::objective::{smooth_gradient, ModelVector, Penalty};

/// Outer/inner iteration budget. Relaxed mode is the cheap configuration
/// used for per-partition solves (20 Newton steps of at most 50 CD sweeps);
/// full mode runs to a tight optimality certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Relaxed,
    Full,
}

/// Coordinate visit order within a CD sweep. Cyclic (index order) is the
/// default and keeps results bit-reproducible; Shuffled reshuffles per
/// Newton step from a fixed seed, so it is equally deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Cyclic,
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub penalty: Penalty,
    pub max_outer: usize,
    pub max_inner: usize,
    pub tol: f64,
    pub mode: SolverMode,
    pub sweep: SweepOrder,
}

impl SolverConfig {
    pub fn relaxed(penalty: Penalty) -> Self {
        SolverConfig {
            penalty,
            max_outer: 20,
            max_inner: 50,
            tol: 1e-4,
            mode: SolverMode::Relaxed,
            sweep: SweepOrder::Cyclic,
        }
    }

    pub fn full(penalty: Penalty) -> Self {
        SolverConfig {
            penalty,
            max_outer: 100,
            max_inner: 1000,
            tol: 1e-8,
            mode: SolverMode::Full,
            sweep: SweepOrder::Cyclic,
        }
    }

    /// Optimality tolerance the mode promises on the returned model.
    pub fn kkt_eps(&self) -> f64 {
        match self.mode {
            SolverMode::Relaxed => 1e-3,
            SolverMode::Full => 1e-6,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.penalty.validate(d)?;
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err(Error::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.mode == SolverMode::Relaxed && (self.max_outer != 20 || self.max_inner != 50) {
            return Err(Error::InvalidConfig(
                "relaxed mode fixes max_outer=20, max_inner=50".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub model: ModelVector,
    /// Objective after each Newton step, starting at the initial point.
    /// Nonincreasing by line-search construction.
    pub objective_trace: Vec<f64>,
    pub outer_iters_used: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

/// `sign(z) * max(|z| - t, 0)`; exact zero inside the kill zone.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest violation of the L1 subgradient optimality condition:
/// zero coordinates must have |grad| within the L1 weight, nonzero ones
/// must sit exactly on the subdifferential boundary.
pub(crate) fn kkt_from_gradient(g: &[f64], w: &[f64], pen: &Penalty) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..w.len() {
        let s = pen.inv_scale(j);
        let l1 = pen.lambda1 * s;
        let full = g[j] + 2.0 * pen.lambda2 * s * s * w[j];
        let viol = if w[j] == 0.0 {
            (full.abs() - l1).max(0.0)
        } else {
            (full + w[j].signum() * l1).abs()
        };
        worst = worst.max(viol);
    }
    worst
}

/// KKT residual of `model` for the penalized objective on `ds`.
pub fn kkt_max_violation(ds: &SparseDataset, model: &ModelVector, pen: &Penalty) -> Result<f64> {
    pen.validate(ds.n_cols())?;
    let g = smooth_gradient(ds, model)?;
    Ok(kkt_from_gradient(&g, &model.coefficients, pen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_sparse, DatasetBuilder, SparseDataset};
    use crate::objective::{lambda_max, objective};

    #[test]
    fn soft_threshold_definition() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        for x in [-3.25, 0.0, 7.5] {
            assert_eq!(soft_threshold(x, 0.0), x);
        }
    }

    fn signed_pair(n_each: usize) -> SparseDataset {
        let mut b = DatasetBuilder::with_dims(1);
        for _ in 0..n_each {
            b.push_row(1.0, 1.0, &[0], &[1.0]).unwrap();
        }
        for _ in 0..n_each {
            b.push_row(-1.0, 1.0, &[0], &[-1.0]).unwrap();
        }
        b.finish().unwrap()
    }

    #[test]
    fn l1_kill_returns_exact_zero() {
        let (ds, _) = synth_sparse(40, 8, 0.5, 3, 4).unwrap();
        let lmax = lambda_max(&ds).unwrap();
        let cfg = SolverConfig::full(Penalty::new(lmax * 1.01, 0.0));
        let res = solve_glmnet(&ds, &cfg, None).unwrap();
        assert!(res.model.coefficients.iter().all(|&w| w == 0.0));
        assert!(res.converged);
    }

    #[test]
    fn one_dimensional_instance_matches_closed_form_and_reference() {
        // 100 rows all yielding margin w: objective is
        // 100*log(1+exp(-w)) + |w|, minimized at sigmoid(-w) = 1/100,
        // i.e. w = ln(99).
        let ds = signed_pair(50);
        let pen = Penalty::new(1.0, 0.0);
        let expected = 99.0f64.ln();
        let res = solve_glmnet(&ds, &SolverConfig::full(pen.clone()), None).unwrap();
        assert!(
            (res.model.coefficients[0] - expected).abs() < 1e-5,
            "glmnet {} vs ln 99 {}",
            res.model.coefficients[0],
            expected
        );
        let reference = solve_reference(&ds, &pen, 1e-12).unwrap();
        assert!((reference.coefficients[0] - expected).abs() < 1e-5);
        assert!((res.model.coefficients[0] - reference.coefficients[0]).abs() < 1e-5);
    }

    #[test]
    fn warm_start_at_optimum_is_a_fixed_point() {
        let (ds, _) = synth_sparse(60, 10, 0.5, 4, 7).unwrap();
        let cfg = SolverConfig::full(Penalty::new(0.05, 0.01));
        let first = solve_glmnet(&ds, &cfg, None).unwrap();
        assert!(first.converged);
        let second = solve_glmnet(&ds, &cfg, Some(&first.model)).unwrap();
        assert!(second.converged);
        assert!(second.outer_iters_used <= 1);
        assert!(second.objective_trace.len() <= 2);
        assert_eq!(second.model.coefficients, first.model.coefficients);
    }

    #[test]
    fn trace_is_monotone_and_kkt_certified() {
        for seed in 0..6u64 {
            let (ds, _) = synth_sparse(50, 12, 0.4, 4, seed).unwrap();
            for (cfg, eps) in [
                (SolverConfig::full(Penalty::new(0.1, 0.05)), 1e-6),
                (SolverConfig::relaxed(Penalty::new(0.1, 0.05)), 1e-3),
            ] {
                let res = solve_glmnet(&ds, &cfg, None).unwrap();
                for pair in res.objective_trace.windows(2) {
                    assert!(pair[1] <= pair[0] + 1e-12, "trace rose: {pair:?}");
                }
                let kkt = kkt_max_violation(&ds, &res.model, &cfg.penalty).unwrap();
                assert!(kkt <= eps, "seed {seed}: kkt {kkt} > {eps}");
            }
        }
    }

    #[test]
    fn fixed_inputs_are_bit_reproducible() {
        let (ds, _) = synth_sparse(80, 15, 0.3, 5, 13).unwrap();
        let cfg = SolverConfig::relaxed(Penalty::new(0.05, 0.01));
        let a = solve_glmnet(&ds, &cfg, None).unwrap();
        let b = solve_glmnet(&ds, &cfg, None).unwrap();
        assert_eq!(a.model.coefficients, b.model.coefficients);
        assert_eq!(a.objective_trace, b.objective_trace);
    }

    #[test]
    fn shuffled_sweep_reaches_the_same_objective() {
        let (ds, _) = synth_sparse(50, 10, 0.5, 4, 19).unwrap();
        let pen = Penalty::new(0.05, 0.0);
        let cyclic = solve_glmnet(&ds, &SolverConfig::full(pen.clone()), None).unwrap();
        let mut cfg = SolverConfig::full(pen.clone());
        cfg.sweep = SweepOrder::Shuffled { seed: 3 };
        let shuffled = solve_glmnet(&ds, &cfg, None).unwrap();
        let fa = objective(&ds, &cyclic.model, &pen).unwrap();
        let fb = objective(&ds, &shuffled.model, &pen).unwrap();
        assert!((fa - fb).abs() / fa.abs().max(1.0) < 1e-6);
        let again = solve_glmnet(&ds, &cfg, None).unwrap();
        assert_eq!(shuffled.model.coefficients, again.model.coefficients);
    }

    #[test]
    fn solver_level_feature_scale_equivalence() {
        for seed in 0..3u64 {
            let (ds, _) = synth_sparse(40, 8, 0.5, 3, seed + 40).unwrap();
            let alpha: Vec<f64> = (0..8).map(|j| 0.5 + 0.3 * j as f64).collect();
            let scaled_pen = Penalty::with_scale(0.08, 0.02, alpha.clone());
            let direct = solve_glmnet(&ds, &SolverConfig::full(scaled_pen.clone()), None).unwrap();
            let cols_scaled = ds.scale_columns(&alpha).unwrap();
            let plain = solve_glmnet(
                &cols_scaled,
                &SolverConfig::full(Penalty::new(0.08, 0.02)),
                None,
            )
            .unwrap();
            let fa = objective(&ds, &direct.model, &scaled_pen).unwrap();
            let mapped = ModelVector::new(
                plain
                    .model
                    .coefficients
                    .iter()
                    .zip(&alpha)
                    .map(|(&u, &a)| u * a)
                    .collect(),
            );
            let fb = objective(&ds, &mapped, &scaled_pen).unwrap();
            assert!(
                (fa - fb).abs() / fa.abs().max(1.0) < 1e-6,
                "seed {seed}: {fa} vs {fb}"
            );
        }
    }

    #[test]
    fn glmnet_and_reference_agree_on_random_instances() {
        for seed in 0..5u64 {
            let (ds, _) = synth_sparse(30, 15, 0.5, 5, seed + 60).unwrap();
            let pen = Penalty::new(0.1, 0.05);
            let res = solve_glmnet(&ds, &SolverConfig::full(pen.clone()), None).unwrap();
            let oracle = solve_reference(&ds, &pen, 1e-10).unwrap();
            let fa = objective(&ds, &res.model, &pen).unwrap();
            let fb = objective(&ds, &oracle, &pen).unwrap();
            assert!(
                (fa - fb).abs() / fa.abs().max(1.0) < 1e-6,
                "seed {seed}: glmnet {fa} vs reference {fb}"
            );
        }
    }

    #[test]
    fn reference_is_monotone_and_handles_empty_data() {
        let (ds, _) = synth_sparse(20, 6, 0.6, 2, 77).unwrap();
        let (_, trace) = solve_reference_traced(&ds, &Penalty::new(0.0, 0.0), 1e-8).unwrap();
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        let empty = SparseDataset::empty(4);
        let m = solve_reference(&empty, &Penalty::new(0.5, 0.1), 1e-8).unwrap();
        assert_eq!(m.coefficients, vec![0.0; 4]);
    }

    #[test]
    fn unattainable_tolerance_reports_no_convergence() {
        // Separable single-point data with no penalty: the objective decays
        // like 1/k and the relative change never reaches 1e-300, so the
        // iteration cap must trip.
        let mut b = DatasetBuilder::with_dims(1);
        b.push_row(1.0, 1.0, &[0], &[1.0]).unwrap();
        let ds = b.finish().unwrap();
        match solve_reference(&ds, &Penalty::new(0.0, 0.0), 1e-300) {
            Err(Error::NoConvergence(iters)) => assert_eq!(iters, 1_000_000),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn relaxed_config_rejects_modified_caps() {
        let mut cfg = SolverConfig::relaxed(Penalty::new(0.1, 0.0));
        cfg.max_outer = 5;
        assert!(cfg.validate(3).is_err());
        let cfg = SolverConfig::full(Penalty::new(-1.0, 0.0));
        assert!(cfg.validate(3).is_err());
    }
}
