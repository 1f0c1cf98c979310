//! Independent proximal-gradient oracle.
//!
//! Accelerated proximal gradient (FISTA) with backtracking step sizes and a
//! monotone safeguard: if the accelerated candidate raises the objective,
//! momentum is dropped and a plain proximal step from the current iterate is
//! taken instead, which the majorization bound makes a descent step. Shares
//! only the objective-module evaluations with the production solver; the
//! prox is computed inline on purpose.

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::objective::{logistic_loss, objective, smooth_gradient, ModelVector, Penalty};

const ITER_CAP: usize = 1_000_000;
const MAX_DOUBLINGS: usize = 60;

/// Smooth part: logistic loss plus the (scaled) quadratic penalty.
fn smooth_value(ds: &SparseDataset, w: &[f64], pen: &Penalty) -> Result<f64> {
    let mut quad = 0.0;
    for (j, &wj) in w.iter().enumerate() {
        let u = wj * pen.inv_scale(j);
        quad += u * u;
    }
    Ok(logistic_loss(ds, &ModelVector::new(w.to_vec()))? + pen.lambda2 * quad)
}

fn smooth_grad(ds: &SparseDataset, w: &[f64], pen: &Penalty) -> Result<Vec<f64>> {
    let mut g = smooth_gradient(ds, &ModelVector::new(w.to_vec()))?;
    for (j, gj) in g.iter_mut().enumerate() {
        let s = pen.inv_scale(j);
        *gj += 2.0 * pen.lambda2 * s * s * w[j];
    }
    Ok(g)
}

/// One proximal step from `point` with backtracked Lipschitz estimate.
/// Returns the new point and the step scale that satisfied the
/// majorization inequality.
fn prox_step(
    ds: &SparseDataset,
    point: &[f64],
    pen: &Penalty,
    l_start: f64,
) -> Result<(Vec<f64>, f64)> {
    let g = smooth_grad(ds, point, pen)?;
    let f_point = smooth_value(ds, point, pen)?;
    let mut l = l_start;
    for _ in 0..MAX_DOUBLINGS {
        let mut z = vec![0.0; point.len()];
        for j in 0..point.len() {
            let q = point[j] - g[j] / l;
            let th = pen.lambda1 * pen.inv_scale(j) / l;
            z[j] = if q > th {
                q - th
            } else if q < -th {
                q + th
            } else {
                0.0
            };
        }
        let f_z = smooth_value(ds, &z, pen)?;
        let mut linear = 0.0;
        let mut dist2 = 0.0;
        for j in 0..point.len() {
            let dj = z[j] - point[j];
            linear += g[j] * dj;
            dist2 += dj * dj;
        }
        let bound = f_point + linear + 0.5 * l * dist2;
        if f_z <= bound + 1e-12 * f_point.abs().max(1.0) {
            return Ok((z, l));
        }
        l *= 2.0;
    }
    Err(Error::SolverDiverged(format!(
        "step-size backtracking exhausted at L = {l}"
    )))
}

/// Proximal-gradient minimizer of the penalized objective, run until the
/// relative objective change stays below `tol` for two consecutive
/// iterations. Returns the model and the (nonincreasing) objective trace.
pub fn solve_reference_traced(
    ds: &SparseDataset,
    pen: &Penalty,
    tol: f64,
) -> Result<(ModelVector, Vec<f64>)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tol must be positive, got {tol}"
        )));
    }
    pen.validate(ds.n_cols())?;
    let d = ds.n_cols();

    let mut x = vec![0.0f64; d];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = objective(ds, &ModelVector::new(x.clone()), pen)?;
    let mut trace = vec![fx];
    let mut l_est = 1.0f64;
    let mut streak = 0usize;

    for _ in 0..ITER_CAP {
        let (z, l_used) = prox_step(ds, &y, pen, l_est)?;
        // Mild decay lets the estimate recover after a conservative stretch.
        l_est = (l_used * 0.9).max(1e-8);
        let fz = objective(ds, &ModelVector::new(z.clone()), pen)?;

        if fz <= fx {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = z
                .iter()
                .zip(&x)
                .map(|(&zj, &xj)| zj + beta * (zj - xj))
                .collect();
            x = z;
            fx = fz;
            t = t_next;
        } else {
            // Momentum overshot; restart with a plain descent step.
            let (z2, l2) = prox_step(ds, &x, pen, l_est)?;
            l_est = (l2 * 0.9).max(1e-8);
            let fz2 = objective(ds, &ModelVector::new(z2.clone()), pen)?;
            if fz2 <= fx {
                x = z2;
                fx = fz2;
            }
            t = 1.0;
            y = x.clone();
        }

        trace.push(fx);
        let prev = trace[trace.len() - 2];
        let rel = (prev - fx).abs() / fx.abs().max(1.0);
        if rel < tol {
            streak += 1;
            if streak >= 2 {
                return Ok((ModelVector::new(x), trace));
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::NoConvergence(ITER_CAP))
}

/// See [`solve_reference_traced`]; discards the trace.
pub fn solve_reference(ds: &SparseDataset, pen: &Penalty, tol: f64) -> Result<ModelVector> {
    solve_reference_traced(ds, pen, tol).map(|(m, _)| m)
}
