//! Disparity statistics and model bias analysis.
//!
//! [`disparity_test`] compares the metric scores of two subgroups with a
//! two-sided Mann-Whitney U test and, for significant differences, Cohen's d.
//! [`bias_analysis`] reports TPR, TNR and the average probability difference
//! (APD) between paired variants.

mod bias;
mod utest;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bias::{
    bias_analysis, bias_analysis_unpaired, BiasReport, LabelledPrediction, PairPrediction,
    POSITIVE_CLASS,
};
pub use utest::{
    asymptotic_p, exact_p, exact_u_counts, mann_whitney_u, midranks, MannWhitney, PValueMode,
    EXACT_MAX_N,
};

use crate::attribution::Method;
use crate::error::{Error, Result};
use crate::metrics::Metric;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Cohen's d with the root mean of the two sample variances as scale.
///
/// Positive when `mean(a) > mean(b)`. If both variances vanish the result
/// is 0 for equal means and an infinity of the matching sign otherwise.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats(
            "Cohen's d needs at least two values per group".into(),
        ));
    }
    let diff = mean(a) - mean(b);
    let s = ((sample_variance(a) + sample_variance(b)) / 2.0).sqrt();
    if s == 0.0 {
        return Ok(if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        });
    }
    Ok(diff / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Metric scores of one method, split by subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupScores {
    pub metric: Metric,
    pub method: Method,
    pub label_a: String,
    pub label_b: String,
    pub scores_a: Vec<f64>,
    pub scores_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityConfig {
    pub alpha: f64,
    pub d_threshold: f64,
    /// Compute Cohen's d for non-significant results as well.
    pub always_effect_size: bool,
}

impl Default for DisparityConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            d_threshold: 0.2,
            always_effect_size: false,
        }
    }
}

impl DisparityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.d_threshold >= 0.0) {
            return Err(Error::Config("effect-size threshold must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityResult {
    pub metric: Metric,
    pub method: Method,
    #[serde(rename = "U")]
    pub u: f64,
    pub p: f64,
    pub p_mode: PValueMode,
    /// `None` when not computed; infinite values mark a degenerate effect size.
    #[serde(with = "effect_size")]
    pub d: Option<f64>,
    pub significant: bool,
    pub considerable: bool,
    /// Subgroup with the larger mean score, if the means differ.
    pub direction: Option<Side>,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    #[serde(rename = "n_B")]
    pub n_b: usize,
}

impl DisparityResult {
    pub fn degenerate(&self) -> bool {
        self.d.is_some_and(|d| d.is_infinite())
    }
}

/// Non-finite effect sizes are written as the strings `"inf"` / `"-inf"`.
mod effect_size {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(d: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            None => s.serialize_none(),
            Some(v) if v.is_finite() => s.serialize_some(v),
            Some(v) if *v > 0.0 => s.serialize_some("inf"),
            Some(_) => s.serialize_some("-inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Number(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) => match t.as_str() {
                "inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("bad effect size '{t}'"))),
            },
        }
    }
}

/// U test between the two subgroups; Cohen's d only for significant results
/// unless `always_effect_size` is set.
pub fn disparity_test(s: &SubgroupScores, cfg: &DisparityConfig) -> Result<DisparityResult> {
    cfg.validate()?;
    let test = mann_whitney_u(&s.scores_a, &s.scores_b)?;
    let significant = test.p <= cfg.alpha;
    let d = if significant || cfg.always_effect_size {
        cohens_d(&s.scores_a, &s.scores_b).ok()
    } else {
        None
    };
    let considerable = significant && d.is_some_and(|d| d.abs() >= cfg.d_threshold);
    let (ma, mb) = (mean(&s.scores_a), mean(&s.scores_b));
    let direction = if ma > mb {
        Some(Side::A)
    } else if mb > ma {
        Some(Side::B)
    } else {
        None
    };
    Ok(DisparityResult {
        metric: s.metric,
        method: s.method,
        u: test.u,
        p: test.p,
        p_mode: test.mode,
        d,
        significant,
        considerable,
        direction,
        n_a: s.scores_a.len(),
        n_b: s.scores_b.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
        (0..n)
            .map(|_| StandardNormal.sample(rng))
            .map(|z: f64| z + shift)
            .collect()
    }

    fn scores(a: Vec<f64>, b: Vec<f64>) -> SubgroupScores {
        SubgroupScores {
            metric: Metric::Sufficiency,
            method: Method::Ig,
            label_a: "MALE".into(),
            label_b: "FEMALE".into(),
            scores_a: a,
            scores_b: b,
        }
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        let d = cohens_d(&[0.0, 2.0], &[-1.0, 1.0]).unwrap();
        assert!((d - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((cohens_d(&[-1.0, 1.0], &[0.0, 2.0]).unwrap() + d).abs() < 1e-12);
        assert!(cohens_d(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cohens_d_degenerate_cases() {
        assert_eq!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cohens_d(&[2.0, 2.0], &[1.0, 1.0]).unwrap(), f64::INFINITY);
        assert_eq!(
            cohens_d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn separated_normals_are_highly_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = normals(&mut rng, 30, 0.0);
        let b = normals(&mut rng, 30, 3.0);
        assert!(mann_whitney_u(&a, &b).unwrap().p < 1e-6);
    }

    #[test]
    fn identical_scores_are_not_significant() {
        let a = vec![0.1, 0.5, 0.2, 0.7, 0.3];
        let r = disparity_test(&scores(a.clone(), a), &DisparityConfig::default()).unwrap();
        assert!(!r.significant);
        assert_eq!(r.p, 1.0);
        assert_eq!(r.d, None);
        assert_eq!(r.direction, None);
    }

    #[test]
    fn shifted_scores_are_significant_towards_a() {
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 1.7).sin() * 0.3).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        let r = disparity_test(&scores(a, b), &DisparityConfig::default()).unwrap();
        assert!(r.significant);
        assert!(r.d.unwrap() > 0.0);
        assert!(r.considerable);
        assert_eq!(r.direction, Some(Side::A));
        assert_eq!((r.n_a, r.n_b), (20, 20));
    }

    #[test]
    fn small_significant_effects_are_not_considerable() {
        // Large samples make a 0.1 SD shift significant.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = normals(&mut rng, 4000, 0.1);
        let b = normals(&mut rng, 4000, 0.0);
        let r = disparity_test(&scores(a, b), &DisparityConfig::default()).unwrap();
        assert!(r.significant);
        assert!(r.d.unwrap().abs() < 0.2);
        assert!(!r.considerable);
    }

    #[test]
    fn effect_size_on_demand() {
        let cfg = DisparityConfig {
            always_effect_size: true,
            ..Default::default()
        };
        let r = disparity_test(&scores(vec![1.0, 2.0, 3.0], vec![1.5, 2.5, 3.5]), &cfg).unwrap();
        assert!(!r.significant);
        assert!(r.d.is_some());
        assert!(!r.considerable);
    }

    #[test]
    fn exchangeable_data_rejects_at_nominal_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let cfg = DisparityConfig::default();
        let reps = 1000;
        let mut rejections = 0;
        for _ in 0..reps {
            let s = scores(normals(&mut rng, 20, 0.0), normals(&mut rng, 20, 0.0));
            rejections += usize::from(disparity_test(&s, &cfg).unwrap().significant);
        }
        let rate = rejections as f64 / reps as f64;
        let bound = 0.05 + 2.0 * (0.05f64 * 0.95 / reps as f64).sqrt();
        assert!(rate <= bound, "{rate}");
    }

    #[test]
    fn json_field_names_and_degenerate_effect_size() {
        let r = disparity_test(
            &scores(vec![2.0, 2.0, 2.0, 2.0], vec![1.0, 1.0, 1.0, 1.0]),
            &DisparityConfig::default(),
        )
        .unwrap();
        assert!(r.degenerate());
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "metric",
            "method",
            "U",
            "p",
            "d",
            "significant",
            "considerable",
            "direction",
            "n_A",
            "n_B",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["d"], "inf");
        let back: DisparityResult = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn config_rejects_bad_alpha() {
        let cfg = DisparityConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn u_complement_identity(a in prop::collection::hash_set(-1000i32..1000, 1..15),
                                 b in prop::collection::hash_set(1000i32..3000, 1..15)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(|v| f64::from(v) - 1500.5).collect();
            let u = mann_whitney_u(&a, &b).unwrap().u;
            let u2 = mann_whitney_u(&b, &a).unwrap().u;
            prop_assert!((u + u2 - (a.len() * b.len()) as f64).abs() < 1e-9);
        }

        #[test]
        fn p_invariant_under_monotone_transform(a in prop::collection::vec(-3.0f64..3.0, 1..20),
                                                b in prop::collection::vec(-3.0f64..3.0, 1..20)) {
            let p = mann_whitney_u(&a, &b).unwrap().p;
            let ta: Vec<f64> = a.iter().map(|v| v.exp() * 2.0 + 1.0).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.exp() * 2.0 + 1.0).collect();
            prop_assert!((p - mann_whitney_u(&ta, &tb).unwrap().p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn cohens_d_scale_equivariance(a in prop::collection::vec(-5.0f64..5.0, 2..12),
                                       b in prop::collection::vec(-5.0f64..5.0, 2..12),
                                       c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
            let d = cohens_d(&a, &b).unwrap();
            prop_assume!(d.is_finite());
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cb: Vec<f64> = b.iter().map(|v| v * c).collect();
            let dc = cohens_d(&ca, &cb).unwrap();
            prop_assert!((dc - c.signum() * d).abs() <= 1e-9 * (1.0 + d.abs()));
        }
    }
}
