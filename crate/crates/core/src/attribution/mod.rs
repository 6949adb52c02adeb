//! Local post-hoc feature attribution.
//!
//! Six methods map `(model, input, target class)` to one real score per
//! token: gradient saliency, gradient x input, integrated gradients,
//! integrated gradients x input, LIME and KernelSHAP. All of them work on the
//! embedding matrix of the input, so they apply equally to the trained
//! [`ClassifierModel`](crate::textmodel::ClassifierModel) and to any other
//! [`Classifier`].

mod gradient;
mod lime;
mod shap;
mod surrogate;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gradient::{
    grad_x_input_scores, ig_x_input_scores, integrated_gradients_matrix,
    integrated_gradients_scores, saliency_scores,
};
pub use lime::lime_scores;
pub use shap::{kernel_shap_scores, shapley_kernel_weight};

use crate::error::{Error, Result};
use crate::textmodel::{Classifier, ClassifierModel, Embeddings, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Grad,
    Gxi,
    Ig,
    Igxi,
    Lime,
    Shap,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Grad,
        Method::Gxi,
        Method::Ig,
        Method::Igxi,
        Method::Lime,
        Method::Shap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Grad => "GRAD",
            Method::Gxi => "GXI",
            Method::Ig => "IG",
            Method::Igxi => "IGXI",
            Method::Lime => "LIME",
            Method::Shap => "SHAP",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Method::Grad => 0x11,
            Method::Gxi => 0x22,
            Method::Ig => 0x33,
            Method::Igxi => 0x44,
            Method::Lime => 0x9e37_79b9_7f4a_7c15,
            Method::Shap => 0xbf58_476d_1ce4_e5b9,
        }
    }

    /// True for the sampling-based methods whose output depends on the seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Lime | Method::Shap)
    }

    /// Raw scores for an embedded input.
    pub fn explain<M: Classifier + ?Sized>(
        self,
        model: &M,
        x: &Embeddings,
        target: usize,
        cfg: &AttributionConfig,
    ) -> Result<Vec<f64>> {
        cfg.validate()?;
        let seed = cfg.seed ^ self.salt();
        let scores = match self {
            Method::Grad => saliency_scores(model, x, target)?,
            Method::Gxi => grad_x_input_scores(model, x, target)?,
            Method::Ig => {
                integrated_gradients_scores(model, x, target, cfg.ig_steps, cfg.ig_baseline)?
            }
            Method::Igxi => ig_x_input_scores(model, x, target, cfg.ig_steps, cfg.ig_baseline)?,
            Method::Lime => lime_scores(model, x, target, cfg, seed)?,
            Method::Shap => kernel_shap_scores(model, x, target, cfg, seed)?,
        };
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("attribution scores"));
        }
        Ok(scores)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown attribution method '{s}'")))
    }
}

/// Reference point for integrated gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgBaseline {
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub ig_steps: usize,
    pub ig_baseline: IgBaseline,
    pub lime_samples: usize,
    /// `None` means `0.75 * sqrt(n)`.
    pub lime_kernel_width: Option<f64>,
    pub shap_samples: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            ig_steps: 32,
            ig_baseline: IgBaseline::Zero,
            lime_samples: 1000,
            lime_kernel_width: None,
            shap_samples: 2048,
            ridge: 1e-3,
            seed: 0,
        }
    }
}

impl AttributionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ig_steps == 0 || self.lime_samples == 0 || self.shap_samples == 0 {
            return Err(Error::Config(
                "attribution sample/step counts must be >= 1".into(),
            ));
        }
        if let Some(w) = self.lime_kernel_width {
            if !(w > 0.0) {
                return Err(Error::Config("LIME kernel width must be > 0".into()));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Config("ridge strength must be >= 0".into()));
        }
        Ok(())
    }

    pub fn kernel_width(&self, n: usize) -> f64 {
        self.lime_kernel_width
            .unwrap_or_else(|| 0.75 * (n as f64).sqrt())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Scores for one input under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub method: Method,
    pub token_ids: Vec<usize>,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    pub target_class: usize,
}

impl Attribution {
    pub fn normalized(&self) -> Vec<f64> {
        normalize_scores(&self.scores)
    }
}

/// Explains a token sequence with the trained classifier.
pub fn explain(
    method: Method,
    model: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
    cfg: &AttributionConfig,
) -> Result<Attribution> {
    let x = model.embed(seq)?;
    let scores = method.explain(model, &x, target, cfg)?;
    Ok(Attribution {
        method,
        token_ids: seq.ids.clone(),
        tokens: seq.tokens.clone(),
        scores,
        target_class: target,
    })
}

pub fn grad_saliency(
    model: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
) -> Result<Attribution> {
    explain(
        Method::Grad,
        model,
        seq,
        target,
        &AttributionConfig::default(),
    )
}

pub fn grad_x_input(model: &ClassifierModel, seq: &TokenSeq, target: usize) -> Result<Attribution> {
    explain(
        Method::Gxi,
        model,
        seq,
        target,
        &AttributionConfig::default(),
    )
}

pub fn integrated_gradients(
    model: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
    cfg: &AttributionConfig,
) -> Result<Attribution> {
    explain(Method::Ig, model, seq, target, cfg)
}

pub fn ig_x_input(
    model: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
    cfg: &AttributionConfig,
) -> Result<Attribution> {
    explain(Method::Igxi, model, seq, target, cfg)
}

pub fn lime(
    model: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
    cfg: &AttributionConfig,
) -> Result<Attribution> {
    explain(Method::Lime, model, seq, target, cfg)
}

pub fn kernel_shap(
    model: &ClassifierModel,
    seq: &TokenSeq,
    target: usize,
    cfg: &AttributionConfig,
) -> Result<Attribution> {
    explain(Method::Shap, model, seq, target, cfg)
}

/// `|s_i| / max_j |s_j|`, or all zeros when every score is zero.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if max == 0.0 {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|s| s.abs() / max).collect()
}

/// One line of the attribution JSON-lines export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub pair_id: String,
    pub subgroup: String,
    pub method: Method,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    pub target_class: usize,
}

pub fn write_attributions_jsonl<W: Write>(mut out: W, records: &[AttributionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<attributions>", e))?;
    }
    Ok(())
}

pub fn read_attributions_jsonl<R: BufRead>(input: R) -> Result<Vec<AttributionRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<attributions>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AttributionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::data("<attributions>", i + 1, e.to_string()))?;
        if rec.tokens.len() != rec.scores.len() {
            return Err(Error::data(
                "<attributions>",
                i + 1,
                "token/score count mismatch",
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planted::{AdditiveModel, ConstantModel, PositionModel};
    use crate::textmodel::{Activation, ModelConfig};

    fn rows(n: usize, d: usize) -> Embeddings {
        let data = (0..n * d).map(|i| 0.3 + 0.1 * i as f64).collect();
        Embeddings::new(n, d, data).unwrap()
    }

    fn random_model(d: usize, h: usize, seed: u64) -> ClassifierModel {
        let cfg = ModelConfig {
            vocab_size: 8,
            embed_dim: d,
            hidden: h,
            activation: Activation::Tanh,
        };
        ClassifierModel::with_init_scale(cfg, seed, 1.0)
    }

    fn fd_grad(model: &ClassifierModel, x: &Embeddings, target: usize) -> Embeddings {
        let h = 1e-5;
        let mut out = Embeddings::zeros(x.rows(), x.cols());
        for k in 0..x.as_slice().len() {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up.as_mut_slice()[k] += h;
            dn.as_mut_slice()[k] -= h;
            out.as_mut_slice()[k] = (model.probability(&up, target).unwrap()
                - model.probability(&dn, target).unwrap())
                / (2.0 * h);
        }
        out
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_scores(&[2.0, -1.0, 0.0]), vec![1.0, 0.5, 0.0]);
        assert_eq!(normalize_scores(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("attention".parse::<Method>().is_err());
    }

    #[test]
    fn zero_output_weights_give_zero_saliency() {
        let mut m = random_model(3, 4, 1);
        m.output_weight.fill(0.0);
        let s = saliency_scores(&m, &rows(4, 3), 0).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_positions_get_zero_saliency() {
        let model = PositionModel {
            position: 1,
            weight: vec![2.0, -1.0],
        };
        let s = saliency_scores(&model, &rows(4, 2), 0).unwrap();
        for (i, v) in s.iter().enumerate() {
            if i == 1 {
                assert!(*v > 0.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn saliency_matches_finite_difference_norms() {
        let m = random_model(3, 5, 4);
        let x = rows(3, 3);
        let s = saliency_scores(&m, &x, 1).unwrap();
        let fd = fd_grad(&m, &x, 1);
        for i in 0..3 {
            let norm = fd.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                (s[i] - norm).abs() <= 1e-6 * norm.max(1e-3),
                "{} vs {norm}",
                s[i]
            );
        }
    }

    #[test]
    fn gxi_zero_row_scores_zero() {
        let m = random_model(2, 3, 2);
        let mut x = rows(3, 2);
        x.row_mut(1).fill(0.0);
        let s = grad_x_input_scores(&m, &x, 0).unwrap();
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn gxi_closed_form_on_linear_scalar_model() {
        // d = 1, hidden = 1, identity activation, zero biases:
        // logit0 - logit1 = (a - b) * w * mean(e), p0 = sigmoid of that.
        let cfg = ModelConfig {
            vocab_size: 4,
            embed_dim: 1,
            hidden: 1,
            activation: Activation::Identity,
        };
        let mut m = ClassifierModel::zeros(cfg);
        let (w, a, b) = (0.8, 1.5, -0.5);
        m.hidden_weight = vec![w];
        m.output_weight = vec![a, b];
        let e = [0.4, -1.2, 2.0];
        let x = Embeddings::new(3, 1, e.to_vec()).unwrap();
        let s = grad_x_input_scores(&m, &x, 0).unwrap();
        let mean = e.iter().sum::<f64>() / 3.0;
        let p0 = 1.0 / (1.0 + (-(a - b) * w * mean).exp());
        for i in 0..3 {
            let expected = p0 * (1.0 - p0) * (a - b) * w / 3.0 * e[i];
            assert!((s[i] - expected).abs() < 1e-14, "{} vs {expected}", s[i]);
        }
    }

    #[test]
    fn gxi_matches_finite_difference_product() {
        let m = random_model(3, 4, 8);
        let x = rows(2, 3);
        let s = grad_x_input_scores(&m, &x, 0).unwrap();
        let fd = fd_grad(&m, &x, 0);
        for i in 0..2 {
            let expected: f64 = fd.row(i).iter().zip(x.row(i)).map(|(g, e)| g * e).sum();
            assert!((s[i] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn ig_at_baseline_is_zero() {
        let m = random_model(3, 4, 3);
        let x = Embeddings::zeros(3, 3);
        let cfg = AttributionConfig::default();
        assert!(Method::Ig
            .explain(&m, &x, 0, &cfg)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(Method::Igxi
            .explain(&m, &x, 0, &cfg)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn ig_rejects_zero_steps() {
        let m = random_model(3, 4, 3);
        let cfg = AttributionConfig {
            ig_steps: 0,
            ..Default::default()
        };
        assert!(Method::Ig.explain(&m, &rows(2, 3), 0, &cfg).is_err());
    }

    #[test]
    fn ig_completeness_on_random_models() {
        for seed in 0..10 {
            let m = random_model(3, 4, seed);
            let x = rows(4, 3);
            let s = integrated_gradients_scores(&m, &x, 0, 256, IgBaseline::Zero).unwrap();
            let delta =
                m.probability(&x, 0).unwrap() - m.probability(&Embeddings::zeros(4, 3), 0).unwrap();
            let sum: f64 = s.iter().sum();
            assert!((sum - delta).abs() <= 1e-2, "seed {seed}: {sum} vs {delta}");
        }
    }

    #[test]
    fn ig_matches_closed_form_path_integral_for_linear_logits() {
        // Identity activation, zero biases: L(alpha) = alpha * c with
        // c = sum_i c_i, c_i = (a - b) w e_i / n, so
        // IG_i = c_i * (sigmoid(c) - sigmoid(0)) / c.
        let cfg = ModelConfig {
            vocab_size: 4,
            embed_dim: 1,
            hidden: 1,
            activation: Activation::Identity,
        };
        let mut m = ClassifierModel::zeros(cfg);
        m.hidden_weight = vec![1.3];
        m.output_weight = vec![0.9, -0.6];
        let e = [0.7, -0.2, 1.1, 0.5];
        let x = Embeddings::new(4, 1, e.to_vec()).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let ci: Vec<f64> = e.iter().map(|v| 1.5 * 1.3 * v / 4.0).collect();
        let c: f64 = ci.iter().sum();
        let s = integrated_gradients_scores(&m, &x, 0, 4096, IgBaseline::Zero).unwrap();
        for i in 0..4 {
            let expected = ci[i] * (sig(c) - 0.5) / c;
            assert!((s[i] - expected).abs() < 1e-4, "{} vs {expected}", s[i]);
        }
    }

    #[test]
    fn igxi_scalar_case_is_product() {
        let cfg = ModelConfig {
            vocab_size: 4,
            embed_dim: 1,
            hidden: 3,
            activation: Activation::Tanh,
        };
        let m = ClassifierModel::with_init_scale(cfg, 5, 1.0);
        let x = Embeddings::new(3, 1, vec![0.5, -1.5, 2.0]).unwrap();
        let ig = integrated_gradients_scores(&m, &x, 1, 32, IgBaseline::Zero).unwrap();
        let igxi = ig_x_input_scores(&m, &x, 1, 32, IgBaseline::Zero).unwrap();
        for i in 0..3 {
            assert!((igxi[i] - ig[i] * x.row(i)[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn lime_on_constant_model_is_zero() {
        let m = ConstantModel { p0: 0.7, dim: 2 };
        let s = Method::Lime
            .explain(&m, &rows(5, 2), 0, &AttributionConfig::default())
            .unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-6), "{s:?}");
    }

    #[test]
    fn lime_recovers_planted_feature() {
        let m = AdditiveModel::new(0.5, vec![0.0, 0.0, 0.3, 0.0, 0.0], 2);
        let s = Method::Lime
            .explain(&m, &rows(5, 2), 0, &AttributionConfig::default())
            .unwrap();
        assert!((s[2] - 0.3).abs() < 0.05, "{s:?}");
        for (i, v) in s.iter().enumerate() {
            if i != 2 {
                assert!(v.abs() < 0.05, "{s:?}");
            }
        }
    }

    #[test]
    fn sampling_methods_are_deterministic() {
        let m = random_model(3, 4, 12);
        let x = rows(12, 3);
        let cfg = AttributionConfig {
            seed: 77,
            ..Default::default()
        };
        for method in [Method::Lime, Method::Shap] {
            assert_eq!(
                method.explain(&m, &x, 0, &cfg).unwrap(),
                method.explain(&m, &x, 0, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn shap_single_token_is_exact_difference() {
        let m = random_model(3, 4, 2);
        let x = rows(1, 3);
        let s = Method::Shap
            .explain(&m, &x, 1, &AttributionConfig::default())
            .unwrap();
        let delta =
            m.probability(&x, 1).unwrap() - m.probability(&Embeddings::zeros(1, 3), 1).unwrap();
        assert_eq!(s, vec![delta]);
    }

    #[test]
    fn shap_local_accuracy_with_sampling() {
        let m = random_model(3, 4, 6);
        let x = rows(14, 3);
        let cfg = AttributionConfig {
            shap_samples: 256,
            ..Default::default()
        };
        let s = Method::Shap.explain(&m, &x, 0, &cfg).unwrap();
        let delta =
            m.probability(&x, 0).unwrap() - m.probability(&Embeddings::zeros(14, 3), 0).unwrap();
        assert!((s.iter().sum::<f64>() - delta).abs() < 1e-9);
    }

    #[test]
    fn shap_recovers_additive_game() {
        let coefs = vec![0.05, -0.1, 0.2, 0.0, 0.15, -0.05, 0.1, 0.02];
        let m = AdditiveModel::new(0.3, coefs.clone(), 2);
        let s = Method::Shap
            .explain(&m, &rows(8, 2), 0, &AttributionConfig::default())
            .unwrap();
        for (a, b) in s.iter().zip(&coefs) {
            assert!((a - b).abs() < 0.02, "{s:?}");
        }
    }

    #[test]
    fn shap_sampled_recovers_additive_game() {
        let coefs: Vec<f64> = (0..16).map(|i| 0.02 * (i as f64 - 7.0)).collect();
        let m = AdditiveModel::new(0.5, coefs.clone(), 2);
        let s = Method::Shap
            .explain(&m, &rows(16, 2), 0, &AttributionConfig::default())
            .unwrap();
        for (a, b) in s.iter().zip(&coefs) {
            assert!((a - b).abs() < 0.02, "{s:?}");
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![AttributionRecord {
            pair_id: "7".into(),
            subgroup: "MALE".into(),
            method: Method::Igxi,
            tokens: vec!["he".into(), "runs".into()],
            scores: vec![0.25, -1e-3],
            target_class: 1,
        }];
        let mut buf = Vec::new();
        write_attributions_jsonl(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"method\":\"IGXI\""));
        assert_eq!(read_attributions_jsonl(&buf[..]).unwrap(), recs);
    }
}
