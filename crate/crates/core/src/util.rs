//! Small numeric helpers.

/// `count` points geometrically spaced from `lo` to `hi`, inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log_space needs 0 < lo <= hi");
    assert!(count >= 1, "log_space needs at least one point");
    if count == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (llo + (lhi - llo) * k as f64 / (count - 1) as f64).exp())
        .collect()
}
