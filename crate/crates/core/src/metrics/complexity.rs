use log::warn;
use serde::{Deserialize, Serialize};

/// Share of raw scores whose magnitude reaches `tau` (inclusive).
pub fn sparsity(scores: &[f64], tau: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|s| s.abs() >= tau).count() as f64 / scores.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniIndex {
    pub value: f64,
    /// Set when every score was zero; `value` is then 0.
    pub all_zero: bool,
}

/// Gini index of the absolute scores: 0 for a uniform vector, `1 - 1/n`
/// for a one-hot vector.
///
/// With `c` the absolute scores sorted ascending and `k` their 1-based rank,
/// `G = 1 - 2 sum_k (c_k / |c|_1) (n - k + 0.5) / n`.
pub fn gini_index(scores: &[f64]) -> GiniIndex {
    let mut abs: Vec<f64> = scores.iter().map(|s| s.abs()).collect();
    let l1: f64 = abs.iter().sum();
    if l1 == 0.0 || abs.is_empty() {
        warn!("gini index of an all-zero attribution is defined as 0");
        return GiniIndex {
            value: 0.0,
            all_zero: true,
        };
    }
    abs.sort_by(f64::total_cmp);
    let n = abs.len() as f64;
    let weighted: f64 = abs
        .iter()
        .enumerate()
        .map(|(i, c)| (c / l1) * (n - (i + 1) as f64 + 0.5) / n)
        .sum();
    GiniIndex {
        value: (1.0 - 2.0 * weighted).clamp(0.0, 1.0),
        all_zero: false,
    }
}
