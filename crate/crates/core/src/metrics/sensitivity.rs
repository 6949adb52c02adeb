use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionConfig, Method};
use crate::error::{Error, Result};
use crate::textmodel::{Classifier, Embeddings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgdRadius {
    /// Fixed L2 radius in embedding space.
    Absolute(f64),
    /// Multiple of the input's mean token-embedding norm.
    RelativeToMeanNorm(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub radius: PgdRadius,
    pub steps: usize,
    /// `None` means radius / 5.
    pub step_size: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            radius: PgdRadius::RelativeToMeanNorm(0.1),
            steps: 10,
            step_size: None,
            restarts: 2,
            seed: 0,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        let r = match self.radius {
            PgdRadius::Absolute(r) | PgdRadius::RelativeToMeanNorm(r) => r,
        };
        if !(r >= 0.0) {
            return Err(Error::Config("PGD radius must be >= 0".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("PGD needs at least one step".into()));
        }
        Ok(())
    }

    pub fn radius_for(&self, x: &Embeddings) -> f64 {
        match self.radius {
            PgdRadius::Absolute(r) => r,
            PgdRadius::RelativeToMeanNorm(f) => {
                let mean = (0..x.rows())
                    .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                    .sum::<f64>()
                    / x.rows().max(1) as f64;
                f * mean
            }
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn relative_change(a: &[f64], b: &[f64], base_norm: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
        / base_norm
}

/// Pulls `y` back onto the L2 ball of radius `r` around `x`.
fn project(y: &mut Embeddings, x: &Embeddings, r: f64) {
    let norm = y
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if norm > r {
        let scale = if norm > 0.0 { r / norm } else { 0.0 };
        for (a, b) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *a = b + (*a - b) * scale;
        }
    }
}

/// Worst-case relative explanation change within an L2 ball around `x`.
///
/// Projected gradient ascent on the prediction error `1 - p(class)`: each
/// step moves along the normalized negative probability gradient and is
/// projected back onto the ball. The input is re-explained with the same
/// method and configuration (same seed) after every step, and the largest
/// `|phi(y) - phi(x)| / |phi(x)|` over all steps and restarts is returned.
/// Restart 0 starts at `x`; later restarts start from a random point in the
/// ball. Returns `None` when `phi(x)` is the zero vector.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity<M: Classifier + ?Sized>(
    model: &M,
    method: Method,
    x: &Embeddings,
    scores: &[f64],
    class: usize,
    attr_cfg: &AttributionConfig,
    pgd: &PgdConfig,
) -> Result<Option<f64>> {
    pgd.validate()?;
    let base_norm = l2(scores);
    if base_norm == 0.0 {
        return Ok(None);
    }
    let r = pgd.radius_for(x);
    if r == 0.0 {
        return Ok(Some(0.0));
    }
    let step = pgd.step_size.unwrap_or(r / 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(pgd.seed);
    let mut worst = 0.0f64;

    for restart in 0..pgd.restarts.max(1) {
        let mut y = x.clone();
        if restart > 0 {
            let dir: Vec<f64> = (0..x.as_slice().len())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let len = l2(&dir);
            let u: f64 = rand::Rng::gen(&mut rng);
            if len > 0.0 {
                for (a, d) in y.as_mut_slice().iter_mut().zip(&dir) {
                    *a += d / len * r * u;
                }
            }
            let phi = method.explain(model, &y, class, attr_cfg)?;
            worst = worst.max(relative_change(&phi, scores, base_norm));
        }
        for _ in 0..pgd.steps {
            let g = model.grad_embeddings(&y, class)?;
            let gn = g.norm();
            if gn == 0.0 {
                break;
            }
            for (a, gv) in y.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a -= step * gv / gn;
            }
            project(&mut y, x, r);
            let phi = method.explain(model, &y, class, attr_cfg)?;
            worst = worst.max(relative_change(&phi, scores, base_norm));
        }
    }
    Ok(Some(worst))
}
