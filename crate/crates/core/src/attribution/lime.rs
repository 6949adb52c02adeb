use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::surrogate::weighted_ridge;
use super::AttributionConfig;
use crate::error::Result;
use crate::textmodel::{Classifier, Embeddings};

/// Local linear surrogate over token-presence masks.
///
/// The first sample is the unmasked input; the remaining masks switch each
/// token off with probability 1/2. A masked token's embedding row is zeroed.
/// Samples are weighted by `exp(-h^2 / width^2)` with `h` the number of
/// masked tokens.
pub fn lime_scores<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
    cfg: &AttributionConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = x.rows();
    let width = cfg.kernel_width(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = cfg.lime_samples.max(1);

    let mut features = Vec::with_capacity(samples);
    let mut targets = Vec::with_capacity(samples);
    let mut weights = Vec::with_capacity(samples);
    for s in 0..samples {
        let keep: Vec<bool> = if s == 0 {
            vec![true; n]
        } else {
            (0..n).map(|_| rng.gen_bool(0.5)).collect()
        };
        let masked = keep.iter().filter(|&&k| !k).count() as f64;
        let y = model.probability(&x.masked_rows(&keep), target)?;
        features.push(
            keep.iter()
                .map(|&k| f64::from(u8::from(k)))
                .collect::<Vec<_>>(),
        );
        targets.push(y);
        weights.push((-(masked * masked) / (width * width)).exp());
    }
    let (_, coef) = weighted_ridge(&features, &targets, &weights, cfg.ridge, true);
    Ok(coef)
}
