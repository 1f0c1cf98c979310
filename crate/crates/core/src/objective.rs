//! Weighted elastic-net logistic regression objective.
//!
//! The smooth part is the row-weighted logistic loss
//! `sum_i rw_i * log(1 + exp(-y_i * w'x_i))`; the penalty is
//! `lambda1 * sum_j |w_j| / a_j + lambda2 * sum_j (w_j / a_j)^2` for optional
//! per-feature scales `a_j` (all 1 by default). Note the asymmetry: the L1
//! term scales by `1/a_j`, the L2 term by `1/a_j^2`.

use crate::data::SparseDataset;
use crate::error::{Error, Result};

/// Regularization parameters. `feature_scale` holds per-feature positive
/// scales `a_j`; absent means all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub lambda1: f64,
    pub lambda2: f64,
    pub feature_scale: Option<Vec<f64>>,
}

impl Penalty {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Penalty {
            lambda1,
            lambda2,
            feature_scale: None,
        }
    }

    pub fn with_scale(lambda1: f64, lambda2: f64, feature_scale: Vec<f64>) -> Self {
        Penalty {
            lambda1,
            lambda2,
            feature_scale: Some(feature_scale),
        }
    }

    /// Inverse scale `1/a_j`, 1 when no scales are set.
    #[inline]
    pub fn inv_scale(&self, j: usize) -> f64 {
        match &self.feature_scale {
            Some(s) => 1.0 / s[j],
            None => 1.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "penalty weights must be nonnegative, got lambda1={} lambda2={}",
                self.lambda1, self.lambda2
            )));
        }
        if let Some(s) = &self.feature_scale {
            if s.len() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    found: s.len(),
                });
            }
            if !s.iter().all(|&a| a.is_finite() && a > 0.0) {
                return Err(Error::InvalidConfig(
                    "feature scales must be positive and finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Penalty value at `coefficients`. The intercept never enters.
    pub fn value(&self, coefficients: &[f64]) -> f64 {
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for (j, &w) in coefficients.iter().enumerate() {
            if w != 0.0 {
                let u = w * self.inv_scale(j);
                l1 += u.abs();
                l2 += u * u;
            }
        }
        self.lambda1 * l1 + self.lambda2 * l2
    }
}

/// A linear model: dense coefficients plus an optional unpenalized intercept.
/// No solver here fits the intercept; it exists for externally built models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub coefficients: Vec<f64>,
    pub intercept: Option<f64>,
}

impl ModelVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        ModelVector {
            coefficients,
            intercept: None,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Count of exactly nonzero coefficients.
    pub fn nnz(&self) -> usize {
        self.coefficients.iter().filter(|&&w| w != 0.0).count()
    }

    /// Raw score `w'x + b` for one CSR row.
    pub fn score(&self, cols: &[usize], vals: &[f64]) -> f64 {
        let dot: f64 = cols
            .iter()
            .zip(vals)
            .map(|(&j, &v)| v * self.coefficients[j])
            .sum();
        dot + self.intercept.unwrap_or(0.0)
    }
}

/// Numerically stable logistic function.
#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stable `log(1 + exp(-z))`.
#[inline]
pub(crate) fn log1p_exp_neg(z: f64) -> f64 {
    (-z.abs()).exp().ln_1p() + (-z).max(0.0)
}

fn check_dims(ds: &SparseDataset, w: &ModelVector) -> Result<()> {
    if w.dim() != ds.n_cols() {
        return Err(Error::DimMismatch {
            expected: ds.n_cols(),
            found: w.dim(),
        });
    }
    Ok(())
}

/// Per-row scores `w'x_i + b`.
pub fn margins(ds: &SparseDataset, w: &ModelVector) -> Result<Vec<f64>> {
    check_dims(ds, w)?;
    Ok((0..ds.n_rows())
        .map(|i| {
            let (cols, vals) = ds.row(i);
            w.score(cols, vals)
        })
        .collect())
}

/// Weighted loss from precomputed label-signed margins `z_i = y_i * m_i`.
pub(crate) fn loss_from_z(ds: &SparseDataset, z: &[f64]) -> f64 {
    z.iter()
        .enumerate()
        .map(|(i, &zi)| ds.row_weight(i) * log1p_exp_neg(zi))
        .sum()
}

/// `sum_i rw_i * log(1 + exp(-y_i * (w'x_i + b)))`, overflow-safe.
pub fn logistic_loss(ds: &SparseDataset, w: &ModelVector) -> Result<f64> {
    let m = margins(ds, w)?;
    let z: Vec<f64> = m
        .iter()
        .enumerate()
        .map(|(i, &mi)| ds.label(i) * mi)
        .collect();
    Ok(loss_from_z(ds, &z))
}

/// Loss plus penalty. The intercept is never penalized.
pub fn objective(ds: &SparseDataset, w: &ModelVector, pen: &Penalty) -> Result<f64> {
    pen.validate(ds.n_cols())?;
    Ok(logistic_loss(ds, w)? + pen.value(&w.coefficients))
}

/// Gradient of the smooth loss with respect to the coefficients:
/// `g_j = sum_i rw_i * (-y_i) * sigmoid(-y_i m_i) * x_ij`.
pub fn smooth_gradient(ds: &SparseDataset, w: &ModelVector) -> Result<Vec<f64>> {
    check_dims(ds, w)?;
    let mut g = vec![0.0; ds.n_cols()];
    for i in 0..ds.n_rows() {
        let (cols, vals) = ds.row(i);
        let y = ds.label(i);
        let m = w.score(cols, vals);
        let s = ds.row_weight(i) * (-y) * sigmoid(-y * m);
        for (&j, &v) in cols.iter().zip(vals) {
            g[j] += s * v;
        }
    }
    Ok(g)
}

/// Diagonal curvature `D_jj = sum_i rw_i * p_i (1 - p_i) * x_ij^2` with
/// `p_i = sigmoid(m_i)`; this is the exact Hessian diagonal.
pub fn quadratic_diag(ds: &SparseDataset, w: &ModelVector) -> Result<Vec<f64>> {
    check_dims(ds, w)?;
    let mut diag = vec![0.0; ds.n_cols()];
    for i in 0..ds.n_rows() {
        let (cols, vals) = ds.row(i);
        let p = sigmoid(w.score(cols, vals));
        let lam = ds.row_weight(i) * p * (1.0 - p);
        for (&j, &v) in cols.iter().zip(vals) {
            diag[j] += lam * v * v;
        }
    }
    Ok(diag)
}

/// Smallest L1 weight at which the all-zero model is optimal:
/// `max_j |grad_j L(0)|`.
pub fn lambda_max(ds: &SparseDataset) -> Result<f64> {
    let g = smooth_gradient(ds, &ModelVector::zeros(ds.n_cols()))?;
    Ok(g.iter().fold(0.0, |acc: f64, &v| acc.max(v.abs())))
}
