//! Trains the bag-of-embeddings classifier on a synthetic gender corpus and
//! saves it as JSON.
//!
//! ```text
//! cargo run --example train_classifier -- [model.json]
//! ```

use xai_disparity::dataset::{
    default_templates, generate_synthetic_paired, split_paired, Injection,
};
use xai_disparity::textmodel::{
    predict, save_model, train, ClassifierModel, ModelConfig, TrainConfig, Vocabulary,
};

fn main() -> xai_disparity::Result<()> {
    let pairs = generate_synthetic_paired(&default_templates(), 200, Injection::None, 1)?;
    let texts: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.a.text.as_str(), p.b.text.as_str()])
        .collect();
    let vocab = Vocabulary::build(&texts)?;
    let split = split_paired(&pairs, 0.8, 1)?;

    let examples = split
        .train
        .iter()
        .flat_map(|p| [&p.a, &p.b])
        .map(|v| Ok((vocab.tokenize(&v.text)?, v.label)))
        .collect::<xai_disparity::Result<Vec<_>>>()?;

    let mut model = ClassifierModel::new(ModelConfig::new(vocab.len()), 1);
    let cfg = TrainConfig {
        epochs: 20,
        warmup_steps: 50,
        seed: 1,
        ..TrainConfig::default()
    };
    let log = train(&mut model, &examples, &cfg)?;
    println!(
        "{} steps, loss {:.4} -> {:.4}",
        log.steps,
        log.epoch_loss[0],
        log.epoch_loss.last().unwrap()
    );

    let mut correct = 0;
    let mut total = 0;
    for v in split.test.iter().flat_map(|p| [&p.a, &p.b]) {
        total += 1;
        if predict(&model, &vocab, &v.text)?.class == v.label {
            correct += 1;
        }
    }
    println!("test accuracy {correct}/{total}");

    let p = predict(&model, &vocab, "she said that her sister was kind")?;
    println!(
        "P(MALE | 'she said that her sister was kind') = {:.3}",
        p.probs[1]
    );

    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "model.json".into());
    save_model(path.as_ref(), &model, &vocab)?;
    println!("saved {path}");
    Ok(())
}
