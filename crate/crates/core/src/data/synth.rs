//! Synthetic sparse classification data with a planted linear model.

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::{DatasetBuilder, SparseDataset};

/// Label noise scale, relative to the planted coefficient magnitudes.
const LABEL_NOISE: f64 = 0.5;

/// Ground-truth weight vector with `informative` nonzero coordinates at
/// seeded random positions, magnitudes in [1, 2), alternating-free signs.
pub fn planted_model(d: usize, informative: usize, seed: u64) -> Vec<f64> {
    assert!(informative <= d, "informative features exceed dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut positions = rand::seq::index::sample(&mut rng, d.max(1), informative.min(d)).into_vec();
    positions.sort_unstable();
    let mut w = vec![0.0; d];
    for j in positions {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        w[j] = sign * (1.0 + rng.gen::<f64>());
    }
    w
}

/// Rows with Bernoulli(`density`) support and standard-normal values;
/// labels are the sign of `x·w` plus Gaussian noise. A zero model yields
/// pure coin-flip labels. Deterministic per seed.
pub fn synth_with_model(
    n: usize,
    density: f64,
    w: &[f64],
    seed: u64,
) -> Result<SparseDataset> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "density must be in (0, 1], got {density}"
        )));
    }
    let d = w.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = Bernoulli::new(density).expect("density checked above");
    let mut builder = DatasetBuilder::with_dims(d);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..n {
        cols.clear();
        vals.clear();
        let mut margin = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            if support.sample(&mut rng) {
                let v: f64 = rng.sample(StandardNormal);
                cols.push(j);
                vals.push(v);
                margin += v * wj;
            }
        }
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * LABEL_NOISE;
        let label = if margin + noise >= 0.0 { 1.0 } else { -1.0 };
        builder.push_row(label, 1.0, &cols, &vals)?;
    }
    builder.finish()
}

/// Synthetic dataset plus the planted model that generated its labels.
pub fn synth_sparse(
    n: usize,
    d: usize,
    density: f64,
    informative: usize,
    seed: u64,
) -> Result<(SparseDataset, Vec<f64>)> {
    if informative > d {
        return Err(Error::InvalidConfig(format!(
            "informative features {informative} exceed dimension {d}"
        )));
    }
    let w = planted_model(d, informative, seed);
    let ds = synth_with_model(n, density, &w, seed)?;
    Ok((ds, w))
}
