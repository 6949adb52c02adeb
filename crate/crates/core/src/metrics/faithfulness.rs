use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricConfig;
use crate::attribution::normalize_scores;
use crate::error::{Error, Result};
use crate::textmodel::{Classifier, Embeddings};

fn check_lengths(x: &Embeddings, scores: &[f64]) -> Result<()> {
    if x.rows() != scores.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} tokens",
            scores.len(),
            x.rows()
        )));
    }
    Ok(())
}

/// For every threshold, which tokens have a normalized score `>= t`.
pub fn threshold_sets(normalized: &[f64], thresholds: &[f64]) -> Vec<Vec<bool>> {
    thresholds
        .iter()
        .map(|&t| normalized.iter().map(|&s| s >= t).collect())
        .collect()
}

/// Mean probability drop of `class` when the top tokens at each threshold
/// are removed (their embedding rows zeroed). Negative drops count as zero.
pub fn aopc_comprehensiveness<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    scores: &[f64],
    class: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    check_lengths(x, scores)?;
    let full = model.probability(x, class)?;
    let norm = normalize_scores(scores);
    let mut total = 0.0;
    for top in threshold_sets(&norm, &cfg.thresholds) {
        if !top.iter().any(|&t| t) {
            continue;
        }
        let keep: Vec<bool> = top.iter().map(|t| !t).collect();
        total += (full - model.probability(&x.masked_rows(&keep), class)?).max(0.0);
    }
    Ok(total / cfg.thresholds.len() as f64)
}

/// Mean probability drop of `class` when only the top tokens at each
/// threshold are kept. Lower is better.
pub fn aopc_sufficiency<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    scores: &[f64],
    class: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    check_lengths(x, scores)?;
    let full = model.probability(x, class)?;
    let norm = normalize_scores(scores);
    let mut total = 0.0;
    for keep in threshold_sets(&norm, &cfg.thresholds) {
        if keep.iter().all(|&k| k) {
            continue;
        }
        total += (full - model.probability(&x.masked_rows(&keep), class)?).max(0.0);
    }
    Ok(total / cfg.thresholds.len() as f64)
}

/// `(soft sufficiency, soft comprehensiveness)` for one perturbed input.
pub fn soft_scores_from_perturbed<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    perturbed: &Embeddings,
    class: usize,
) -> Result<(f64, f64)> {
    let drop = (model.probability(x, class)? - model.probability(perturbed, class)?).max(0.0);
    Ok((1.0 - drop, drop))
}

/// `x * e` where every element of token `i`'s row survives with probability `keep_prob[i]`.
pub fn bernoulli_mask<R: Rng>(x: &Embeddings, keep_prob: &[f64], rng: &mut R) -> Embeddings {
    let mut out = x.clone();
    for (i, &q) in keep_prob.iter().enumerate() {
        for v in out.row_mut(i) {
            if !rng.gen_bool(q.clamp(0.0, 1.0)) {
                *v = 0.0;
            }
        }
    }
    out
}

fn soft_metric<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    keep_prob: &[f64],
    class: usize,
    cfg: &MetricConfig,
    sufficiency: bool,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut total = 0.0;
    for _ in 0..cfg.soft_samples {
        let perturbed = bernoulli_mask(x, keep_prob, &mut rng);
        let (s, c) = soft_scores_from_perturbed(model, x, &perturbed, class)?;
        total += if sufficiency { s } else { c };
    }
    Ok(total / cfg.soft_samples as f64)
}

/// Monte-Carlo soft sufficiency: embedding elements are retained with
/// probability equal to their token's normalized score.
pub fn soft_sufficiency<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    scores: &[f64],
    class: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    check_lengths(x, scores)?;
    let keep = normalize_scores(scores);
    soft_metric(model, x, &keep, class, cfg, true)
}

/// Monte-Carlo soft comprehensiveness: embedding elements are retained with
/// probability one minus their token's normalized score.
pub fn soft_comprehensiveness<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    scores: &[f64],
    class: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    check_lengths(x, scores)?;
    let keep: Vec<f64> = normalize_scores(scores).iter().map(|s| 1.0 - s).collect();
    soft_metric(model, x, &keep, class, cfg, false)
}
