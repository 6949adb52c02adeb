//! Explanation quality metrics.
//!
//! Faithfulness: AOPC comprehensiveness and sufficiency, soft
//! comprehensiveness and sufficiency. Complexity: sparsity and Gini index.
//! Robustness: sensitivity under a PGD-searched perturbation.
//!
//! Removal is always operationalized as zeroing a token's embedding row, so
//! the sequence length never changes.

mod complexity;
mod faithfulness;
mod sensitivity;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use complexity::{gini_index, sparsity, GiniIndex};
pub use faithfulness::{
    aopc_comprehensiveness, aopc_sufficiency, bernoulli_mask, soft_comprehensiveness,
    soft_scores_from_perturbed, soft_sufficiency, threshold_sets,
};
pub use sensitivity::{sensitivity, PgdConfig, PgdRadius};

use crate::attribution::{AttributionConfig, Method};
use crate::error::{Error, Result};
use crate::textmodel::{Classifier, Embeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Comprehensiveness,
    Sufficiency,
    SoftComprehensiveness,
    SoftSufficiency,
    Gini,
    Sparsity,
    Sensitivity,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Comprehensiveness,
        Metric::Sufficiency,
        Metric::SoftComprehensiveness,
        Metric::SoftSufficiency,
        Metric::Gini,
        Metric::Sparsity,
        Metric::Sensitivity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Comprehensiveness => "comprehensiveness",
            Metric::Sufficiency => "sufficiency",
            Metric::SoftComprehensiveness => "soft_comprehensiveness",
            Metric::SoftSufficiency => "soft_sufficiency",
            Metric::Gini => "gini",
            Metric::Sparsity => "sparsity",
            Metric::Sensitivity => "sensitivity",
        }
    }

    /// Column label used in result grids.
    pub fn short_label(self) -> &'static str {
        match self {
            Metric::Comprehensiveness => "Compr.",
            Metric::Sufficiency => "Suff.",
            Metric::SoftComprehensiveness => "Soft Compr.",
            Metric::SoftSufficiency => "Soft Suff.",
            Metric::Gini => "Gini",
            Metric::Sparsity => "Spars.",
            Metric::Sensitivity => "Sens.",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let m = match key.as_str() {
            "comprehensiveness" | "compr" => Metric::Comprehensiveness,
            "sufficiency" | "suff" => Metric::Sufficiency,
            "soft_comprehensiveness" | "soft_compr" => Metric::SoftComprehensiveness,
            "soft_sufficiency" | "soft_suff" => Metric::SoftSufficiency,
            "gini" => Metric::Gini,
            "sparsity" | "spars" => Metric::Sparsity,
            "sensitivity" | "sens" => Metric::Sensitivity,
            _ => return Err(Error::Config(format!("unknown metric '{s}'"))),
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// AOPC thresholds on normalized scores, strictly increasing in (0, 1].
    pub thresholds: Vec<f64>,
    pub sparsity_threshold: f64,
    pub soft_samples: usize,
    pub seed: u64,
    pub pgd: PgdConfig,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            thresholds: (1..=10).map(|i| i as f64 / 10.0).collect(),
            sparsity_threshold: 0.1,
            soft_samples: 16,
            seed: 0,
            pgd: PgdConfig::default(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::Config(
                "at least one AOPC threshold is required".into(),
            ));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0))
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "AOPC thresholds must increase strictly within (0, 1]".into(),
            ));
        }
        if !(self.sparsity_threshold > 0.0) {
            return Err(Error::Config("sparsity threshold must be > 0".into()));
        }
        if self.soft_samples == 0 {
            return Err(Error::Config(
                "soft metrics need at least one sample".into(),
            ));
        }
        self.pgd.validate()
    }

    /// Copy with the Monte-Carlo and PGD seeds replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.pgd.seed = seed.rotate_left(17) ^ 0x5851_f42d_4c95_7f2d;
        c
    }
}

/// Everything a metric may need about one explained input.
pub struct MetricInput<'a, M: ?Sized> {
    pub model: &'a M,
    pub x: &'a Embeddings,
    pub scores: &'a [f64],
    /// Class `j` whose probability the faithfulness metrics track.
    pub class: usize,
    pub method: Method,
    pub attribution: &'a AttributionConfig,
}

/// Evaluates one metric. `Ok(None)` marks an undefined value (sensitivity of
/// an all-zero explanation) that must be left out of the statistics.
pub fn evaluate<M: Classifier + ?Sized>(
    metric: Metric,
    input: &MetricInput<'_, M>,
    cfg: &MetricConfig,
) -> Result<Option<f64>> {
    let MetricInput {
        model,
        x,
        scores,
        class,
        ..
    } = *input;
    let value = match metric {
        Metric::Comprehensiveness => aopc_comprehensiveness(model, x, scores, class, cfg)?,
        Metric::Sufficiency => aopc_sufficiency(model, x, scores, class, cfg)?,
        Metric::SoftComprehensiveness => soft_comprehensiveness(model, x, scores, class, cfg)?,
        Metric::SoftSufficiency => soft_sufficiency(model, x, scores, class, cfg)?,
        Metric::Gini => gini_index(scores).value,
        Metric::Sparsity => sparsity(scores, cfg.sparsity_threshold),
        Metric::Sensitivity => {
            return sensitivity(
                model,
                input.method,
                x,
                scores,
                class,
                input.attribution,
                &cfg.pgd,
            )
        }
    };
    Ok(Some(value))
}

/// One metric value for one (input, method, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub pair_id: String,
    pub subgroup: String,
    pub method: Method,
    pub metric: Metric,
    /// `None` for undefined values; written as an empty CSV field.
    pub value: Option<f64>,
}

/// Writes the score table as CSV: `pair_id,subgroup,method,metric,value`.
pub fn write_scores_csv<W: Write>(out: W, samples: &[ScoreSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair_id", "subgroup", "method", "metric", "value"])?;
    for s in samples {
        let value = s.value.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            s.pair_id.as_str(),
            s.subgroup.as_str(),
            s.method.as_str(),
            s.metric.as_str(),
            value.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<scores>", e))?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<ScoreSample>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 5 {
            return Err(Error::data("<scores>", line, "expected 5 columns"));
        }
        let method = rec[2]
            .parse()
            .map_err(|e: Error| Error::data("<scores>", line, e.to_string()))?;
        let metric = rec[3]
            .parse()
            .map_err(|e: Error| Error::data("<scores>", line, e.to_string()))?;
        let value = if rec[4].is_empty() {
            None
        } else {
            Some(
                rec[4]
                    .parse::<f64>()
                    .map_err(|e| Error::data("<scores>", line, e.to_string()))?,
            )
        };
        out.push(ScoreSample {
            pair_id: rec[0].to_string(),
            subgroup: rec[1].to_string(),
            method,
            metric,
            value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planted::{AdditiveModel, ConstantModel, LogisticModel};
    use crate::textmodel::{Activation, ClassifierModel, ModelConfig};

    fn ones(n: usize, d: usize) -> Embeddings {
        Embeddings::new(n, d, vec![1.0; n * d]).unwrap()
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity(&[0.5, 0.05, -0.2, 0.0], 0.1), 0.5);
        assert_eq!(sparsity(&[0.0, 0.0, 0.0], 0.1), 0.0);
        assert_eq!(sparsity(&[0.1, -0.1, 0.1], 0.1), 1.0);
    }

    #[test]
    fn gini_examples() {
        for n in 1..=8 {
            let uniform = vec![1.0 / n as f64; n];
            assert!(gini_index(&uniform).value.abs() < 1e-12);
        }
        let g = gini_index(&[0.0, 1.0, 0.0, 0.0]);
        assert!((g.value - 0.75).abs() < 1e-12);
        assert!(!g.all_zero);
        // Ascending |s| = (1, 3): 1 - 2 [ (1/4)(1.5/2) + (3/4)(0.5/2) ] = 0.25
        assert!((gini_index(&[3.0, 1.0]).value - 0.25).abs() < 1e-12);
        assert!((gini_index(&[-3.0, 1.0]).value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gini_of_zero_vector_is_flagged() {
        let g = gini_index(&[0.0, 0.0]);
        assert_eq!(g.value, 0.0);
        assert!(g.all_zero);
    }

    #[test]
    fn aopc_comprehensiveness_examples() {
        let cfg = MetricConfig::default();
        let model = AdditiveModel::new(0.5, vec![0.0, 0.3, 0.0], 2);
        let x = ones(3, 2);
        assert_eq!(
            aopc_comprehensiveness(&model, &x, &[0.0; 3], 0, &cfg).unwrap(),
            0.0
        );
        let constant = ConstantModel { p0: 0.8, dim: 2 };
        assert_eq!(
            aopc_comprehensiveness(&constant, &x, &[1.0, 0.2, 0.5], 0, &cfg).unwrap(),
            0.0
        );
        let v = aopc_comprehensiveness(&model, &x, &[0.0, 1.0, 0.0], 0, &cfg).unwrap();
        assert!((v - 0.3).abs() < 1e-12, "{v}");
    }

    #[test]
    fn aopc_sufficiency_examples() {
        let cfg = MetricConfig::default();
        let model = AdditiveModel::new(0.5, vec![0.0, 0.3, 0.0], 2);
        let x = ones(3, 2);
        assert_eq!(
            aopc_sufficiency(&model, &x, &[1.0; 3], 0, &cfg).unwrap(),
            0.0
        );
        let constant = ConstantModel { p0: 0.8, dim: 2 };
        assert_eq!(
            aopc_sufficiency(&constant, &x, &[1.0, 0.2, 0.5], 0, &cfg).unwrap(),
            0.0
        );
        // The effect token carries the top score: it is always kept.
        let kept = aopc_sufficiency(&model, &x, &[0.1, 1.0, 0.3], 0, &cfg).unwrap();
        assert!(kept.abs() < 1e-12);
        // The effect token has score 0: it is dropped at every threshold.
        let dropped = aopc_sufficiency(&model, &x, &[1.0, 0.0, 0.5], 0, &cfg).unwrap();
        assert!((dropped - 0.3).abs() < 1e-12, "{dropped}");
    }

    #[test]
    fn threshold_sets_are_nested() {
        let norm = [0.05, 0.31, 1.0, 0.7, 0.2];
        let sets = threshold_sets(&norm, &MetricConfig::default().thresholds);
        for w in sets.windows(2) {
            for (lo, hi) in w[0].iter().zip(&w[1]) {
                assert!(
                    !hi || *lo,
                    "higher threshold selected a token the lower one did not"
                );
            }
        }
    }

    #[test]
    fn soft_metric_trivial_cases() {
        let cfg = MetricConfig::default();
        let model = ClassifierModel::with_init_scale(
            ModelConfig {
                vocab_size: 4,
                embed_dim: 3,
                hidden: 4,
                activation: Activation::Tanh,
            },
            9,
            1.0,
        );
        let x = Embeddings::new(2, 3, vec![0.4, -0.3, 1.0, 0.2, 0.9, -0.5]).unwrap();
        assert_eq!(
            soft_sufficiency(&model, &x, &[1.0, -1.0], 0, &cfg).unwrap(),
            1.0
        );
        assert_eq!(
            soft_comprehensiveness(&model, &x, &[0.0, 0.0], 0, &cfg).unwrap(),
            0.0
        );
        let constant = ConstantModel { p0: 0.3, dim: 3 };
        assert_eq!(
            soft_sufficiency(&constant, &x, &[0.2, 0.9], 1, &cfg).unwrap(),
            1.0
        );
        assert_eq!(
            soft_comprehensiveness(&constant, &x, &[0.2, 0.9], 1, &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn soft_pair_identity_on_shared_perturbation() {
        let model = LogisticModel {
            weight: vec![1.0, -2.0],
            bias: 0.1,
            sharpness: 3.0,
        };
        let x = Embeddings::new(2, 2, vec![0.5, -0.5, 1.0, 0.25]).unwrap();
        let xp = Embeddings::new(2, 2, vec![0.0, -0.5, 1.0, 0.0]).unwrap();
        let (s, c) = soft_scores_from_perturbed(&model, &x, &xp, 0).unwrap();
        assert!((s + c - 1.0).abs() < 1e-15);
    }

    /// Two 1-dim tokens with normalized scores (0.5, 1.0); only token 0
    /// affects the output, so each sample has two outcomes of equal odds.
    #[test]
    fn soft_metrics_match_two_outcome_enumeration() {
        let model = AdditiveModel::new(0.5, vec![0.3, 0.0], 1);
        let x = ones(2, 1);
        let cfg = MetricConfig {
            soft_samples: 4000,
            seed: 5,
            ..Default::default()
        };
        let se = 0.5 * 0.3 / (cfg.soft_samples as f64).sqrt();
        let s = soft_sufficiency(&model, &x, &[0.5, 1.0], 0, &cfg).unwrap();
        assert!((s - 0.85).abs() < 4.0 * se, "{s}");
        let c = soft_comprehensiveness(&model, &x, &[0.5, 1.0], 0, &cfg).unwrap();
        assert!((c - 0.15).abs() < 4.0 * se, "{c}");
    }

    #[test]
    fn metric_values_are_deterministic_for_fixed_seeds() {
        let model = LogisticModel {
            weight: vec![1.0, -2.0],
            bias: 0.1,
            sharpness: 3.0,
        };
        let x = Embeddings::new(3, 2, vec![0.5, -0.5, 1.0, 0.25, -0.3, 0.8]).unwrap();
        let cfg = MetricConfig::default().with_seed(42);
        let scores = [0.3, -0.9, 0.1];
        let a = soft_sufficiency(&model, &x, &scores, 0, &cfg).unwrap();
        let b = soft_sufficiency(&model, &x, &scores, 0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sensitivity_zero_radius_is_zero() {
        let model = LogisticModel {
            weight: vec![1.0, -2.0],
            bias: 0.1,
            sharpness: 3.0,
        };
        let x = ones(3, 2);
        let acfg = AttributionConfig::default();
        let scores = Method::Grad.explain(&model, &x, 0, &acfg).unwrap();
        let pgd = PgdConfig {
            radius: PgdRadius::Absolute(0.0),
            ..Default::default()
        };
        assert_eq!(
            sensitivity(&model, Method::Grad, &x, &scores, 0, &acfg, &pgd).unwrap(),
            Some(0.0)
        );
    }

    #[test]
    fn sensitivity_of_zero_explanation_is_missing() {
        let model = ConstantModel { p0: 0.6, dim: 2 };
        let x = ones(3, 2);
        let acfg = AttributionConfig::default();
        let pgd = PgdConfig::default();
        assert_eq!(
            sensitivity(&model, Method::Grad, &x, &[0.0; 3], 0, &acfg, &pgd).unwrap(),
            None
        );
    }

    #[test]
    fn sensitivity_of_constant_explainer_is_zero() {
        let model = ConstantModel { p0: 0.6, dim: 2 };
        let x = Embeddings::new(3, 2, vec![0.5, -0.5, 1.0, 0.25, -0.3, 0.8]).unwrap();
        let acfg = AttributionConfig {
            seed: 3,
            ..Default::default()
        };
        let scores = Method::Lime.explain(&model, &x, 0, &acfg).unwrap();
        let got = sensitivity(
            &model,
            Method::Lime,
            &x,
            &scores,
            0,
            &acfg,
            &PgdConfig::default(),
        )
        .unwrap();
        assert!(
            matches!(got, Some(v) if v == 0.0) || got.is_none(),
            "{got:?}"
        );
    }

    #[test]
    fn sensitivity_grows_when_the_ball_reaches_a_sharp_boundary() {
        // Boundary at mean . w = 0; the input sits at margin 0.05.
        let model = LogisticModel {
            weight: vec![1.0, 0.0],
            bias: 0.0,
            sharpness: 40.0,
        };
        let x = Embeddings::new(2, 2, vec![0.05, 1.0, 0.05, -1.0]).unwrap();
        let acfg = AttributionConfig::default();
        let scores = Method::Grad.explain(&model, &x, 0, &acfg).unwrap();
        let run = |r: f64| {
            let pgd = PgdConfig {
                radius: PgdRadius::Absolute(r),
                ..Default::default()
            };
            sensitivity(&model, Method::Grad, &x, &scores, 0, &acfg, &pgd)
                .unwrap()
                .unwrap()
        };
        let (wide, narrow) = (run(0.3), run(0.03));
        assert!(wide > narrow, "{wide} <= {narrow}");
    }

    #[test]
    fn config_validation() {
        assert!(MetricConfig::default().validate().is_ok());
        let bad = MetricConfig {
            thresholds: vec![0.5, 0.2],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MetricConfig {
            soft_samples: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn score_csv_round_trip_with_missing_values() {
        let samples = vec![
            ScoreSample {
                pair_id: "1".into(),
                subgroup: "MALE".into(),
                method: Method::Lime,
                metric: Metric::Sensitivity,
                value: None,
            },
            ScoreSample {
                pair_id: "1".into(),
                subgroup: "FEMALE".into(),
                method: Method::Grad,
                metric: Metric::Gini,
                value: Some(0.125),
            },
        ];
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "pair_id,subgroup,method,metric,value\n1,MALE,LIME,sensitivity,\n1,FEMALE,GRAD,gini,0.125\n"
        );
        assert_eq!(read_scores_csv(&buf[..]).unwrap(), samples);
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("Spars".parse::<Metric>().unwrap(), Metric::Sparsity);
        assert!("plausibility".parse::<Metric>().is_err());
    }
}
