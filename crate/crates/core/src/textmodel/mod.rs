//! Desk-scale differentiable text classifier.
//!
//! A word-level tokenizer, an embedding + tanh MLP binary classifier with
//! exact reverse-mode gradients, and an AdamW trainer. The model is the `f`
//! that every attribution method and metric probes.

mod model;
mod train;
mod vocab;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use model::{
    grad_wrt_embeddings, predict, Activation, Classifier, ClassifierModel, Embeddings, ModelConfig,
    ParamGrads, Prediction, NUM_CLASSES,
};
pub use train::{train, TrainConfig, TrainLog};
pub use vocab::{split_tokens, TokenSeq, Vocabulary, PAD, PAD_ID, UNK, UNK_ID};

use crate::error::{Error, Result};

/// On-disk form of a trained model: config, vocabulary and flat row-major
/// parameter arrays in one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub config: ModelConfig,
    pub vocabulary: Vocabulary,
    pub parameters: SavedParameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedParameters {
    pub embedding: Vec<f64>,
    pub hidden_weight: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weight: Vec<f64>,
    pub output_bias: Vec<f64>,
    pub row_of: Vec<usize>,
}

impl SavedModel {
    pub fn new(model: &ClassifierModel, vocabulary: &Vocabulary) -> Self {
        Self {
            config: model.config.clone(),
            vocabulary: vocabulary.clone(),
            parameters: SavedParameters {
                embedding: model.embedding.clone(),
                hidden_weight: model.hidden_weight.clone(),
                hidden_bias: model.hidden_bias.clone(),
                output_weight: model.output_weight.clone(),
                output_bias: model.output_bias.clone(),
                row_of: model.row_of.clone(),
            },
        }
    }

    pub fn into_parts(self) -> Result<(ClassifierModel, Vocabulary)> {
        let c = &self.config;
        let (v, d, h) = (c.vocab_size, c.embed_dim, c.hidden);
        let p = self.parameters;
        let expect = [
            ("embedding", p.embedding.len(), v * d),
            ("hidden_weight", p.hidden_weight.len(), h * d),
            ("hidden_bias", p.hidden_bias.len(), h),
            ("output_weight", p.output_weight.len(), NUM_CLASSES * h),
            ("output_bias", p.output_bias.len(), NUM_CLASSES),
            ("row_of", p.row_of.len(), v),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Shape(format!(
                    "{name}: {got} values, expected {want}"
                )));
            }
        }
        if self.vocabulary.len() != v {
            return Err(Error::Shape(format!(
                "vocabulary has {} tokens, config says {v}",
                self.vocabulary.len()
            )));
        }
        if p.row_of.iter().any(|&r| r >= v) {
            return Err(Error::Shape(
                "row_of points past the embedding table".into(),
            ));
        }
        let model = ClassifierModel {
            config: self.config,
            embedding: p.embedding,
            hidden_weight: p.hidden_weight,
            hidden_bias: p.hidden_bias,
            output_weight: p.output_weight,
            output_bias: p.output_bias,
            row_of: p.row_of,
        };
        if !model.all_finite() {
            return Err(Error::NonFinite("saved parameters"));
        }
        Ok((model, self.vocabulary))
    }
}

pub fn save_model(path: &Path, model: &ClassifierModel, vocabulary: &Vocabulary) -> Result<()> {
    let json = serde_json::to_string(&SavedModel::new(model, vocabulary))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(ClassifierModel, Vocabulary)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<SavedModel>(&text)?.into_parts()
}
