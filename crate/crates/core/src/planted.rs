//! Hand-built classifiers with known behaviour.
//!
//! These implement [`Classifier`] with closed-form outputs so explainers and
//! metrics can be checked against exact answers. A token counts as "present"
//! when any entry of its embedding row is non-zero.

use crate::error::{Error, Result};
use crate::textmodel::{Classifier, Embeddings, Prediction};

fn check(x: &Embeddings, dim: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::EmptyText);
    }
    if x.cols() != dim {
        return Err(Error::Shape(format!("width {} != {dim}", x.cols())));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("embeddings"));
    }
    Ok(())
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Same class-0 probability for every input.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    pub p0: f64,
    pub dim: usize,
}

impl Classifier for ConstantModel {
    fn embed_dim(&self) -> usize {
        self.dim
    }

    fn predict_embeddings(&self, x: &Embeddings) -> Result<Prediction> {
        check(x, self.dim)?;
        Ok(Prediction::from_class0_probability(self.p0))
    }

    fn grad_embeddings(&self, x: &Embeddings, _target: usize) -> Result<Embeddings> {
        check(x, self.dim)?;
        Ok(Embeddings::zeros(x.rows(), x.cols()))
    }
}

/// `p0 = base + sum_i coef_i * 1[token i present]`, clamped to `[0, 1]`.
///
/// Piecewise constant, so its input gradient is zero.
#[derive(Debug, Clone)]
pub struct AdditiveModel {
    pub base: f64,
    pub coefs: Vec<f64>,
    pub dim: usize,
}

impl AdditiveModel {
    pub fn new(base: f64, coefs: Vec<f64>, dim: usize) -> Self {
        Self { base, coefs, dim }
    }

    pub fn class0_probability(&self, x: &Embeddings) -> f64 {
        let p = (0..x.rows())
            .filter(|&i| x.row(i).iter().any(|&v| v != 0.0))
            .map(|i| self.coefs.get(i).copied().unwrap_or(0.0))
            .sum::<f64>()
            + self.base;
        p.clamp(0.0, 1.0)
    }
}

impl Classifier for AdditiveModel {
    fn embed_dim(&self) -> usize {
        self.dim
    }

    fn predict_embeddings(&self, x: &Embeddings) -> Result<Prediction> {
        check(x, self.dim)?;
        Ok(Prediction::from_class0_probability(
            self.class0_probability(x),
        ))
    }

    fn grad_embeddings(&self, x: &Embeddings, _target: usize) -> Result<Embeddings> {
        check(x, self.dim)?;
        Ok(Embeddings::zeros(x.rows(), x.cols()))
    }
}

/// `p0 = sigmoid(weight . e_position)`: only one token position matters.
#[derive(Debug, Clone)]
pub struct PositionModel {
    pub position: usize,
    pub weight: Vec<f64>,
}

impl Classifier for PositionModel {
    fn embed_dim(&self) -> usize {
        self.weight.len()
    }

    fn predict_embeddings(&self, x: &Embeddings) -> Result<Prediction> {
        check(x, self.weight.len())?;
        let z: f64 = if self.position < x.rows() {
            x.row(self.position)
                .iter()
                .zip(&self.weight)
                .map(|(a, b)| a * b)
                .sum()
        } else {
            0.0
        };
        Ok(Prediction::from_logits([z, 0.0]))
    }

    fn grad_embeddings(&self, x: &Embeddings, target: usize) -> Result<Embeddings> {
        let p = self.predict_embeddings(x)?.probs[0];
        let sign = if target == 0 { 1.0 } else { -1.0 };
        let mut g = Embeddings::zeros(x.rows(), x.cols());
        if self.position < x.rows() {
            for (gv, w) in g.row_mut(self.position).iter_mut().zip(&self.weight) {
                *gv = sign * p * (1.0 - p) * w;
            }
        }
        Ok(g)
    }
}

/// `p0 = sigmoid(sharpness * (weight . mean_i e_i + bias))`.
///
/// Large `sharpness` gives a sharp decision boundary on the hyperplane
/// `weight . mean = -bias`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weight: Vec<f64>,
    pub bias: f64,
    pub sharpness: f64,
}

impl LogisticModel {
    fn margin(&self, x: &Embeddings) -> f64 {
        let n = x.rows() as f64;
        let mut z = self.bias;
        for i in 0..x.rows() {
            z += x
                .row(i)
                .iter()
                .zip(&self.weight)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n;
        }
        z
    }
}

impl Classifier for LogisticModel {
    fn embed_dim(&self) -> usize {
        self.weight.len()
    }

    fn predict_embeddings(&self, x: &Embeddings) -> Result<Prediction> {
        check(x, self.weight.len())?;
        Ok(Prediction::from_class0_probability(sigmoid(
            self.sharpness * self.margin(x),
        )))
    }

    fn grad_embeddings(&self, x: &Embeddings, target: usize) -> Result<Embeddings> {
        check(x, self.weight.len())?;
        let p = sigmoid(self.sharpness * self.margin(x));
        let sign = if target == 0 { 1.0 } else { -1.0 };
        let scale = sign * p * (1.0 - p) * self.sharpness / x.rows() as f64;
        let mut g = Embeddings::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            for (gv, w) in g.row_mut(i).iter_mut().zip(&self.weight) {
                *gv = scale * w;
            }
        }
        Ok(g)
    }
}
