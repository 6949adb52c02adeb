use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::surrogate::weighted_ridge;
use super::AttributionConfig;
use crate::error::Result;
use crate::textmodel::{Classifier, Embeddings};

/// Largest token count for which every coalition is enumerated when the
/// sample budget allows it.
const MAX_ENUMERATED_TOKENS: usize = 20;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of a coalition of size `size` among `n` players.
pub fn shapley_kernel_weight(n: usize, size: usize) -> f64 {
    if size == 0 || size == n {
        return f64::INFINITY;
    }
    (n - 1) as f64 / (binomial(n, size) * size as f64 * (n - size) as f64)
}

/// KernelSHAP with masked tokens represented by zero embedding rows.
///
/// The empty and full coalitions enter as hard constraints (infinite kernel
/// weight): `f(empty)` is the regression offset and the scores sum exactly to
/// `f(x) - f(empty)`. All other coalitions are enumerated when `2^n - 2` fits
/// in the sample budget; otherwise coalition sizes are sampled in proportion
/// to their total kernel mass, each draw paired with its complement.
pub fn kernel_shap_scores<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
    cfg: &AttributionConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = x.rows();
    let full = model.probability(x, target)?;
    let empty = model.probability(&x.masked_rows(&vec![false; n]), target)?;
    let delta = full - empty;
    if n == 1 {
        return Ok(vec![delta]);
    }

    let coalitions = if n <= MAX_ENUMERATED_TOKENS && (1usize << n) - 2 <= cfg.shap_samples {
        enumerate_coalitions(n)
    } else {
        sample_coalitions(n, cfg.shap_samples.max(2), seed)
    };

    // Eliminate the last player through the efficiency constraint:
    // v(z) - v(0) - z_n * delta = sum_{i<n} phi_i (z_i - z_n)
    let mut features = Vec::with_capacity(coalitions.len());
    let mut targets = Vec::with_capacity(coalitions.len());
    let mut weights = Vec::with_capacity(coalitions.len());
    for (keep, w) in &coalitions {
        let value = model.probability(&x.masked_rows(keep), target)?;
        let last = f64::from(u8::from(keep[n - 1]));
        features.push(
            keep[..n - 1]
                .iter()
                .map(|&k| f64::from(u8::from(k)) - last)
                .collect::<Vec<_>>(),
        );
        targets.push(value - empty - last * delta);
        weights.push(*w);
    }
    let (_, mut phi) = weighted_ridge(&features, &targets, &weights, 0.0, false);
    let rest: f64 = phi.iter().sum();
    phi.push(delta - rest);
    Ok(phi)
}

fn enumerate_coalitions(n: usize) -> Vec<(Vec<bool>, f64)> {
    (1..(1usize << n) - 1)
        .map(|bits| {
            let keep: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            let size = bits.count_ones() as usize;
            (keep, shapley_kernel_weight(n, size))
        })
        .collect()
}

fn sample_coalitions(n: usize, budget: usize, seed: u64) -> Vec<(Vec<bool>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Total kernel mass of all coalitions of a given size is (n-1)/(s(n-s)).
    let mass: Vec<f64> = (1..n)
        .map(|s| (n - 1) as f64 / (s as f64 * (n - s) as f64))
        .collect();
    let total: f64 = mass.iter().sum();
    let mut counts: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for _ in 0..budget / 2 {
        let mut u = rng.gen::<f64>() * total;
        let mut size = n - 1;
        for (i, m) in mass.iter().enumerate() {
            if u < *m {
                size = i + 1;
                break;
            }
            u -= m;
        }
        let mut keep = vec![false; n];
        for idx in sample(&mut rng, n, size) {
            keep[idx] = true;
        }
        let complement: Vec<bool> = keep.iter().map(|k| !k).collect();
        *counts.entry(keep).or_insert(0.0) += 1.0;
        *counts.entry(complement).or_insert(0.0) += 1.0;
    }
    counts.into_iter().collect()
}
