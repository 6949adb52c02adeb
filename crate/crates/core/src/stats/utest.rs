use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest combined sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs `(a_i, b_j)` with `a_i > b_j`, ties counting one half.
    pub u: f64,
    pub p: f64,
    pub mode: PValueMode,
}

/// Midranks (1-based) of `values` and the sizes of all tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Null frequencies of `U` for sample sizes `(m, n)`: entry `u` counts the
/// rank arrangements with that statistic.
pub fn exact_u_counts(m: usize, n: usize) -> Vec<u64> {
    // table[j] holds the distribution for (i, j) while i sweeps 0..=m.
    let mut table: Vec<Vec<u64>> = vec![vec![1]; n + 1];
    for i in 1..=m {
        let mut next: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
        next.push(vec![1]);
        for j in 1..=n {
            let mut counts = vec![0u64; i * j + 1];
            // The largest observation belongs to b ...
            for (u, c) in next[j - 1].iter().enumerate() {
                counts[u] += c;
            }
            // ... or to a, where it beats all j observations of b.
            for (u, c) in table[j].iter().enumerate() {
                counts[u + j] += c;
            }
            next.push(counts);
        }
        table = next;
    }
    table.swap_remove(n)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Stats("both samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("test sample"));
    }
    Ok(())
}

/// Two-sided Mann-Whitney U test.
///
/// Exact when the combined size is at most [`EXACT_MAX_N`] and there are no
/// ties; otherwise the normal approximation with tie-corrected variance and
/// a continuity correction of one half.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (m, n) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..m].iter().sum();
    let u = rank_sum - (m * (m + 1)) as f64 / 2.0;
    let total = m + n;

    if total <= EXACT_MAX_N && ties.is_empty() {
        return Ok(MannWhitney {
            u,
            p: exact_p(u, m, n),
            mode: PValueMode::Exact,
        });
    }
    let tie_sum: usize = ties.iter().map(|&t| t * t * t - t).sum();
    Ok(MannWhitney {
        u,
        p: asymptotic_p(u, m, n, tie_sum),
        mode: PValueMode::Asymptotic,
    })
}

/// Exact two-sided p-value of a tie-free statistic `u` under the null.
pub fn exact_p(u: f64, m: usize, n: usize) -> f64 {
    let counts = exact_u_counts(m, n);
    let all: u64 = counts.iter().sum();
    let k = (u.round().max(0.0) as usize).min(m * n);
    let lower: u64 = counts[..=k].iter().sum();
    let upper: u64 = counts[k..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all as f64).min(1.0)
}

/// Normal-approximation two-sided p-value with continuity correction.
/// `tie_sum` is the sum of `t^3 - t` over tie groups of the pooled sample.
pub fn asymptotic_p(u: f64, m: usize, n: usize, tie_sum: usize) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let nt = mf + nf;
    let tie_term = if nt > 1.0 {
        tie_sum as f64 / (nt * (nt - 1.0))
    } else {
        0.0
    };
    let var = mf * nf / 12.0 * ((nt + 1.0) - tie_term);
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mf * nf / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * Normal::standard().sf(z)).min(1.0)
}
