use crate::error::{Error, Result};
use crate::textmodel::{Classifier, Embeddings};

use super::IgBaseline;

/// L2 norm of each token's gradient row.
pub fn saliency_scores<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
) -> Result<Vec<f64>> {
    let g = model.grad_embeddings(x, target)?;
    Ok((0..g.rows())
        .map(|i| g.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect())
}

/// Signed dot product of each gradient row with its embedding row.
pub fn grad_x_input_scores<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
) -> Result<Vec<f64>> {
    let g = model.grad_embeddings(x, target)?;
    Ok(row_dots(&g, x))
}

fn row_dots(a: &Embeddings, b: &Embeddings) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.row(i).iter().zip(b.row(i)).map(|(u, v)| u * v).sum())
        .collect()
}

fn baseline_for(x: &Embeddings, baseline: IgBaseline) -> Embeddings {
    match baseline {
        IgBaseline::Zero => Embeddings::zeros(x.rows(), x.cols()),
        IgBaseline::Constant(c) => {
            let mut b = Embeddings::zeros(x.rows(), x.cols());
            b.as_mut_slice().fill(c);
            b
        }
    }
}

/// Per-dimension integrated gradients `(x - x') * mean_k grad f(x' + k/m (x - x'))`
/// using a right Riemann sum with `steps` points.
pub fn integrated_gradients_matrix<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
    steps: usize,
    baseline: IgBaseline,
) -> Result<Embeddings> {
    if steps == 0 {
        return Err(Error::Config(
            "integrated gradients needs at least one step".into(),
        ));
    }
    let base = baseline_for(x, baseline);
    let diff: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(base.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let mut avg = vec![0.0; diff.len()];
    let mut point = base.clone();
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        for ((p, b), d) in point
            .as_mut_slice()
            .iter_mut()
            .zip(base.as_slice())
            .zip(&diff)
        {
            *p = b + alpha * d;
        }
        let g = model.grad_embeddings(&point, target)?;
        for (a, gv) in avg.iter_mut().zip(g.as_slice()) {
            *a += gv;
        }
    }
    let inv = 1.0 / steps as f64;
    let data = avg.iter().zip(&diff).map(|(a, d)| a * inv * d).collect();
    Embeddings::new(x.rows(), x.cols(), data)
}

pub fn integrated_gradients_scores<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
    steps: usize,
    baseline: IgBaseline,
) -> Result<Vec<f64>> {
    let ig = integrated_gradients_matrix(model, x, target, steps, baseline)?;
    Ok((0..ig.rows()).map(|i| ig.row(i).iter().sum()).collect())
}

/// Integrated gradients re-weighted by the input before summing over dimensions.
pub fn ig_x_input_scores<M: Classifier + ?Sized>(
    model: &M,
    x: &Embeddings,
    target: usize,
    steps: usize,
    baseline: IgBaseline,
) -> Result<Vec<f64>> {
    let ig = integrated_gradients_matrix(model, x, target, steps, baseline)?;
    Ok(row_dots(&ig, x))
}
