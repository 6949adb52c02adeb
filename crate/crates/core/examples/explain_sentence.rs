//! Explains one sentence with all six attribution methods.
//!
//! ```text
//! cargo run --example explain_sentence -- "he thanked his doctor"
//! ```

use xai_disparity::attribution::{explain, AttributionConfig, Method};
use xai_disparity::dataset::{default_templates, generate_synthetic_paired, Injection};
use xai_disparity::pipeline::{train_classifier, AuditConfig};
use xai_disparity::textmodel::Vocabulary;

fn main() -> xai_disparity::Result<()> {
    let sentence = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "she told her brother about the garden".into());

    let pairs = generate_synthetic_paired(&default_templates(), 150, Injection::None, 4)?;
    let mut texts: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.a.text.as_str(), p.b.text.as_str()])
        .collect();
    texts.push(&sentence);
    let vocab = Vocabulary::build(&texts)?;
    let examples = pairs
        .iter()
        .flat_map(|p| [&p.a, &p.b])
        .map(|v| Ok((vocab.tokenize(&v.text)?, v.label)))
        .collect::<xai_disparity::Result<Vec<_>>>()?;
    let mut cfg = AuditConfig::default();
    cfg.train.epochs = 30;
    cfg.train.warmup_steps = 50;
    let (model, _) = train_classifier(&vocab, &examples, &cfg, 4)?;

    let seq = vocab.tokenize(&sentence)?;
    let prediction = model.forward(&model.embed(&seq)?)?;
    let class = prediction.class;
    println!(
        "{sentence:?}: class {class}, p = {:.3}\n",
        prediction.probs[class]
    );

    let attr_cfg = AttributionConfig::default().with_seed(4);
    print!("{:<8}", "");
    for t in &seq.tokens {
        print!("{t:>9}");
    }
    println!();
    for method in Method::ALL {
        let a = explain(method, &model, &seq, class, &attr_cfg)?;
        print!("{:<8}", method.as_str());
        for s in &a.scores {
            print!("{s:>9.4}");
        }
        println!();
    }
    Ok(())
}
