use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{TokenSeq, Vocabulary};
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 2;

/// Row-major `n x d` matrix of token embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Copy with the rows where `keep[i]` is false replaced by zeros.
    pub fn masked_rows(&self, keep: &[bool]) -> Self {
        let mut out = self.clone();
        for (i, &k) in keep.iter().enumerate() {
            if !k {
                out.row_mut(i).fill(0.0);
            }
        }
        out
    }
}

/// Class probabilities, logits and the argmax class for one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; NUM_CLASSES],
    pub logits: [f64; NUM_CLASSES],
    pub class: usize,
}

impl Prediction {
    pub fn from_logits(logits: [f64; NUM_CLASSES]) -> Self {
        let max = logits[0].max(logits[1]);
        let e = [(logits[0] - max).exp(), (logits[1] - max).exp()];
        let z = e[0] + e[1];
        let probs = [e[0] / z, e[1] / z];
        Self {
            probs,
            logits,
            class: usize::from(probs[1] > probs[0]),
        }
    }

    /// Builds a prediction from a probability for class 0; logits are log-probabilities.
    pub fn from_class0_probability(p0: f64) -> Self {
        let probs = [p0, 1.0 - p0];
        Self {
            probs,
            logits: [p0.ln(), (1.0 - p0).ln()],
            class: usize::from(probs[1] > probs[0]),
        }
    }
}

/// Anything the attribution methods and metrics can probe: a binary
/// classifier over token-embedding matrices with input gradients.
pub trait Classifier: Sync {
    fn embed_dim(&self) -> usize;

    fn predict_embeddings(&self, x: &Embeddings) -> Result<Prediction>;

    /// Gradient of the softmax probability of `target` with respect to every
    /// embedding entry of `x`.
    fn grad_embeddings(&self, x: &Embeddings, target: usize) -> Result<Embeddings>;

    fn probability(&self, x: &Embeddings, target: usize) -> Result<f64> {
        Ok(self.predict_embeddings(x)?.probs[target])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 16,
            hidden: 32,
            activation: Activation::Tanh,
        }
    }
}

/// Bag-of-embeddings classifier.
///
/// Each token embedding goes through a shared hidden layer
/// `h_i = act(W1 e_i + b1)`; the hidden vectors are mean-pooled and mapped to
/// two logits by `W2 . + b2`. Token order never matters, and every token gets
/// its own input gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub config: ModelConfig,
    /// `vocab_size x embed_dim`
    pub embedding: Vec<f64>,
    /// `hidden x embed_dim`
    pub hidden_weight: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// `2 x hidden`
    pub output_weight: Vec<f64>,
    pub output_bias: Vec<f64>,
    /// Embedding row used for each token id. Identity unless rows were tied.
    pub row_of: Vec<usize>,
}

/// Gradients of a scalar loss with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub embedding: Vec<f64>,
    pub hidden_weight: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weight: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl ParamGrads {
    fn zeros_like(m: &ClassifierModel) -> Self {
        Self {
            embedding: vec![0.0; m.embedding.len()],
            hidden_weight: vec![0.0; m.hidden_weight.len()],
            hidden_bias: vec![0.0; m.hidden_bias.len()],
            output_weight: vec![0.0; m.output_weight.len()],
            output_bias: vec![0.0; m.output_bias.len()],
        }
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.embedding,
            &self.hidden_weight,
            &self.hidden_bias,
            &self.output_weight,
            &self.output_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.embedding,
            &mut self.hidden_weight,
            &mut self.hidden_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }

    pub(crate) fn add_assign(&mut self, other: &ParamGrads) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
}

/// Cached forward activations for one input.
struct Trace {
    hidden: Vec<f64>,
    pooled: Vec<f64>,
    prediction: Prediction,
}

impl ClassifierModel {
    /// All parameters zero; predicts (0.5, 0.5) for every input.
    pub fn zeros(config: ModelConfig) -> Self {
        let ModelConfig {
            vocab_size: v,
            embed_dim: d,
            hidden: h,
            ..
        } = config;
        Self {
            embedding: vec![0.0; v * d],
            hidden_weight: vec![0.0; h * d],
            hidden_bias: vec![0.0; h],
            output_weight: vec![0.0; NUM_CLASSES * h],
            output_bias: vec![0.0; NUM_CLASSES],
            row_of: (0..v).collect(),
            config,
        }
    }

    /// Weights and embeddings drawn from uniform(-0.1, 0.1); biases start at zero.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        Self::with_init_scale(config, seed, 0.1)
    }

    pub fn with_init_scale(config: ModelConfig, seed: u64, scale: f64) -> Self {
        let mut m = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in m
            .embedding
            .iter_mut()
            .chain(m.hidden_weight.iter_mut())
            .chain(m.output_weight.iter_mut())
        {
            *w = rng.gen_range(-scale..scale);
        }
        m
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.embedding,
            &self.hidden_weight,
            &self.hidden_bias,
            &self.output_weight,
            &self.output_bias,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.embedding,
            &mut self.hidden_weight,
            &mut self.hidden_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }

    /// Makes all ids in each group read one shared embedding row. Groups that
    /// share an id are merged.
    pub fn tie_rows(&mut self, groups: &[Vec<usize>]) -> Result<()> {
        let v = self.row_of.len();
        if let Some(&id) = groups.iter().flatten().find(|&&id| id >= v) {
            return Err(Error::Shape(format!("token id {id} out of range")));
        }
        fn find(parent: &[usize], mut x: usize) -> usize {
            while parent[x] != x {
                x = parent[x];
            }
            x
        }
        for group in groups {
            let Some(&first) = group.first() else {
                continue;
            };
            let root = find(&self.row_of, first);
            for &id in group {
                let r = find(&self.row_of, id);
                if r != root {
                    self.row_of[r] = root;
                }
            }
        }
        for id in 0..v {
            self.row_of[id] = find(&self.row_of, id);
        }
        Ok(())
    }

    pub fn embed(&self, seq: &TokenSeq) -> Result<Embeddings> {
        let d = self.config.embed_dim;
        let mut data = Vec::with_capacity(seq.len() * d);
        for &id in &seq.ids {
            let row = *self
                .row_of
                .get(id)
                .ok_or_else(|| Error::Shape(format!("token id {id} >= vocab size")))?;
            data.extend_from_slice(&self.embedding[row * d..(row + 1) * d]);
        }
        Embeddings::new(seq.len(), d, data)
    }

    fn check_input(&self, x: &Embeddings) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::EmptyText);
        }
        if x.cols() != self.config.embed_dim {
            return Err(Error::Shape(format!(
                "embedding width {} != model width {}",
                x.cols(),
                self.config.embed_dim
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("embeddings"));
        }
        Ok(())
    }

    fn trace(&self, x: &Embeddings) -> Trace {
        let (n, d, h) = (x.rows(), self.config.embed_dim, self.config.hidden);
        let act = self.config.activation;
        let mut hidden = vec![0.0; n * h];
        let mut pooled = vec![0.0; h];
        for i in 0..n {
            let e = x.row(i);
            for j in 0..h {
                let w = &self.hidden_weight[j * d..(j + 1) * d];
                let pre = self.hidden_bias[j] + dot(w, e);
                let a = act.apply(pre);
                hidden[i * h + j] = a;
                pooled[j] += a;
            }
        }
        let inv_n = 1.0 / n as f64;
        pooled.iter_mut().for_each(|p| *p *= inv_n);
        let mut logits = [0.0; NUM_CLASSES];
        for (k, logit) in logits.iter_mut().enumerate() {
            *logit = self.output_bias[k] + dot(&self.output_weight[k * h..(k + 1) * h], &pooled);
        }
        Trace {
            hidden,
            pooled,
            prediction: Prediction::from_logits(logits),
        }
    }

    pub fn forward(&self, x: &Embeddings) -> Result<Prediction> {
        self.check_input(x)?;
        Ok(self.trace(x).prediction)
    }

    /// Back-propagates `grad_logits` to the pre-activation of every token's
    /// hidden unit: returns `n x hidden` values.
    fn backprop_hidden(
        &self,
        trace: &Trace,
        n: usize,
        grad_logits: &[f64; NUM_CLASSES],
    ) -> Vec<f64> {
        let h = self.config.hidden;
        let act = self.config.activation;
        let mut grad_pooled = vec![0.0; h];
        for (k, g) in grad_logits.iter().enumerate() {
            for j in 0..h {
                grad_pooled[j] += g * self.output_weight[k * h + j];
            }
        }
        let inv_n = 1.0 / n as f64;
        let mut grad_pre = vec![0.0; n * h];
        for i in 0..n {
            for j in 0..h {
                let a = trace.hidden[i * h + j];
                grad_pre[i * h + j] = grad_pooled[j] * inv_n * act.derivative_from_output(a);
            }
        }
        grad_pre
    }

    fn grad_pre_to_inputs(&self, grad_pre: &[f64], n: usize) -> Embeddings {
        let (d, h) = (self.config.embed_dim, self.config.hidden);
        let mut out = Embeddings::zeros(n, d);
        for i in 0..n {
            let row = out.row_mut(i);
            for j in 0..h {
                let g = grad_pre[i * h + j];
                if g == 0.0 {
                    continue;
                }
                let w = &self.hidden_weight[j * d..(j + 1) * d];
                for (r, wv) in row.iter_mut().zip(w) {
                    *r += g * wv;
                }
            }
        }
        out
    }

    /// Cross-entropy loss of `label` and its gradient with respect to all
    /// parameters, for the token sequence `seq`.
    pub fn loss_and_grads(&self, seq: &TokenSeq, label: usize) -> Result<(f64, ParamGrads)> {
        let x = self.embed(seq)?;
        self.check_input(&x)?;
        let mut grads = ParamGrads::zeros_like(self);
        let loss = self.accumulate_grads(seq, &x, label, &mut grads);
        Ok((loss, grads))
    }

    pub(crate) fn accumulate_grads(
        &self,
        seq: &TokenSeq,
        x: &Embeddings,
        label: usize,
        grads: &mut ParamGrads,
    ) -> f64 {
        let (n, d, h) = (x.rows(), self.config.embed_dim, self.config.hidden);
        let trace = self.trace(x);
        let p = trace.prediction.probs;
        let loss = -p[label].max(f64::MIN_POSITIVE).ln();
        let mut grad_logits = p;
        grad_logits[label] -= 1.0;

        for (k, g) in grad_logits.iter().enumerate() {
            grads.output_bias[k] += g;
            for j in 0..h {
                grads.output_weight[k * h + j] += g * trace.pooled[j];
            }
        }
        let grad_pre = self.backprop_hidden(&trace, n, &grad_logits);
        for i in 0..n {
            let e = x.row(i);
            for j in 0..h {
                let g = grad_pre[i * h + j];
                grads.hidden_bias[j] += g;
                for (gw, ev) in grads.hidden_weight[j * d..(j + 1) * d].iter_mut().zip(e) {
                    *gw += g * ev;
                }
            }
        }
        let grad_x = self.grad_pre_to_inputs(&grad_pre, n);
        for (i, &id) in seq.ids.iter().enumerate() {
            let row = self.row_of[id];
            for (ge, g) in grads.embedding[row * d..(row + 1) * d]
                .iter_mut()
                .zip(grad_x.row(i))
            {
                *ge += g;
            }
        }
        loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Classifier for ClassifierModel {
    fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn predict_embeddings(&self, x: &Embeddings) -> Result<Prediction> {
        self.forward(x)
    }

    fn grad_embeddings(&self, x: &Embeddings, target: usize) -> Result<Embeddings> {
        if target >= NUM_CLASSES {
            return Err(Error::Config(format!("target class {target} out of range")));
        }
        self.check_input(x)?;
        let trace = self.trace(x);
        let p = trace.prediction.probs;
        // d p_t / d logit_k = p_t (1[k = t] - p_k)
        let mut grad_logits = [0.0; NUM_CLASSES];
        for (k, g) in grad_logits.iter_mut().enumerate() {
            let delta = if k == target { 1.0 } else { 0.0 };
            *g = p[target] * (delta - p[k]);
        }
        let grad_pre = self.backprop_hidden(&trace, x.rows(), &grad_logits);
        Ok(self.grad_pre_to_inputs(&grad_pre, x.rows()))
    }
}

/// Input gradient of the target-class probability for a token sequence.
pub fn grad_wrt_embeddings(
    m: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
) -> Result<Embeddings> {
    m.grad_embeddings(&m.embed(seq)?, target)
}

/// Tokenizes, embeds and classifies `text`.
pub fn predict(m: &ClassifierModel, vocab: &Vocabulary, text: &str) -> Result<Prediction> {
    let seq = vocab.tokenize(text)?;
    m.forward(&m.embed(&seq)?)
}
