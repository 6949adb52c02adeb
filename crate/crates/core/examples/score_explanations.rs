//! Scores explanations of a planted model with every quality metric.
//!
//! Only token 0 moves the prediction, so a faithful explanation puts all its
//! mass there. The example contrasts that with a uniform and a misplaced one.

use xai_disparity::attribution::{AttributionConfig, Method};
use xai_disparity::metrics::{evaluate, Metric, MetricConfig, MetricInput};
use xai_disparity::planted::AdditiveModel;
use xai_disparity::textmodel::Embeddings;

fn main() -> xai_disparity::Result<()> {
    let model = AdditiveModel::new(0.2, vec![0.7, 0.02, 0.02, 0.02], 3);
    let x = Embeddings::from_rows(&[
        vec![0.5, -0.2, 0.1],
        vec![0.3, 0.3, 0.3],
        vec![-0.4, 0.1, 0.2],
        vec![0.2, 0.2, -0.1],
    ])?;
    let attribution = AttributionConfig::default();
    let cfg = MetricConfig {
        soft_samples: 256,
        ..MetricConfig::default()
    };

    let candidates: [(&str, Vec<f64>); 3] = [
        ("focused", vec![1.0, 0.0, 0.0, 0.0]),
        ("uniform", vec![0.25; 4]),
        ("misplaced", vec![0.0, 0.0, 0.0, 1.0]),
    ];
    print!("{:<10}", "");
    for m in &Metric::ALL[..6] {
        print!("{:>12}", m.short_label());
    }
    println!();
    for (name, scores) in &candidates {
        let input = MetricInput {
            model: &model,
            x: &x,
            scores,
            class: 0,
            method: Method::Grad,
            attribution: &attribution,
        };
        print!("{name:<10}");
        for &m in &Metric::ALL[..6] {
            match evaluate(m, &input, &cfg)? {
                Some(v) => print!("{v:>12.4}"),
                None => print!("{:>12}", "undefined"),
            }
        }
        println!();
    }
    Ok(())
}
