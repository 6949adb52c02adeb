use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmodel::Prediction;

/// Class index treated as positive in TPR/TNR; subgroup A (male) by convention.
pub const POSITIVE_CLASS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelledPrediction {
    pub label: usize,
    pub prediction: Prediction,
}

/// Predictions for the two variants of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction {
    pub a: LabelledPrediction,
    pub b: LabelledPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Share of positive-labelled inputs predicted positive.
    pub tpr: Option<f64>,
    /// Share of negative-labelled inputs predicted negative.
    pub tnr: Option<f64>,
    /// Mean over pairs of `|p_{y_A}(x_A) - p_{y_B}(x_B)|`, each variant scored
    /// on the probability of its own label.
    pub apd: Option<f64>,
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_pairs: usize,
}

fn rates(items: &[LabelledPrediction]) -> Result<(Option<f64>, Option<f64>, usize, usize)> {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for item in items {
        match item.label {
            POSITIVE_CLASS => {
                pos += 1;
                tp += usize::from(item.prediction.class == POSITIVE_CLASS);
            }
            0 => {
                neg += 1;
                tn += usize::from(item.prediction.class == 0);
            }
            other => return Err(Error::Stats(format!("label {other} is not binary"))),
        }
    }
    let ratio = |k: usize, total: usize| (total > 0).then(|| k as f64 / total as f64);
    Ok((ratio(tp, pos), ratio(tn, neg), pos, neg))
}

/// TPR and TNR over every variant of every pair, plus APD across pairs.
pub fn bias_analysis(pairs: &[PairPrediction]) -> Result<BiasReport> {
    let items: Vec<LabelledPrediction> = pairs.iter().flat_map(|p| [p.a, p.b]).collect();
    let (tpr, tnr, n_positive, n_negative) = rates(&items)?;
    let apd = if pairs.is_empty() {
        warn!("no paired predictions; APD omitted");
        None
    } else {
        let total: f64 = pairs
            .iter()
            .map(|p| (p.a.prediction.probs[p.a.label] - p.b.prediction.probs[p.b.label]).abs())
            .sum();
        Some(total / pairs.len() as f64)
    };
    Ok(BiasReport {
        tpr,
        tnr,
        apd,
        n_positive,
        n_negative,
        n_pairs: pairs.len(),
    })
}

/// TPR and TNR for data without pairs; APD is omitted.
pub fn bias_analysis_unpaired(items: &[LabelledPrediction]) -> Result<BiasReport> {
    let (tpr, tnr, n_positive, n_negative) = rates(items)?;
    warn!("unpaired data; APD omitted");
    Ok(BiasReport {
        tpr,
        tnr,
        apd: None,
        n_positive,
        n_negative,
        n_pairs: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(label: usize, p1: f64) -> LabelledPrediction {
        LabelledPrediction {
            label,
            prediction: Prediction::from_class0_probability(1.0 - p1),
        }
    }

    #[test]
    fn perfect_predictions() {
        let pairs = vec![
            PairPrediction {
                a: lp(1, 0.9),
                b: lp(0, 0.2),
            },
            PairPrediction {
                a: lp(1, 0.7),
                b: lp(0, 0.4),
            },
        ];
        let r = bias_analysis(&pairs).unwrap();
        assert_eq!(r.tpr, Some(1.0));
        assert_eq!(r.tnr, Some(1.0));
        assert_eq!((r.n_positive, r.n_negative, r.n_pairs), (2, 2, 2));
        // |0.9 - 0.8| and |0.7 - 0.6|
        assert!((r.apd.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rates_count_misses() {
        let pairs = vec![
            PairPrediction {
                a: lp(1, 0.4),
                b: lp(0, 0.6),
            },
            PairPrediction {
                a: lp(1, 0.8),
                b: lp(0, 0.1),
            },
        ];
        let r = bias_analysis(&pairs).unwrap();
        assert_eq!(r.tpr, Some(0.5));
        assert_eq!(r.tnr, Some(0.5));
    }

    #[test]
    fn identical_outputs_on_same_label_pairs_give_zero_apd() {
        let pairs = vec![PairPrediction {
            a: lp(1, 0.63),
            b: lp(1, 0.63),
        }];
        assert_eq!(bias_analysis(&pairs).unwrap().apd, Some(0.0));
    }

    #[test]
    fn unpaired_and_empty_inputs_omit_apd() {
        let r = bias_analysis_unpaired(&[lp(1, 0.9), lp(0, 0.9)]).unwrap();
        assert_eq!(r.apd, None);
        assert_eq!(r.tnr, Some(0.0));
        let r = bias_analysis(&[]).unwrap();
        assert_eq!((r.tpr, r.tnr, r.apd), (None, None, None));
    }

    #[test]
    fn non_binary_labels_are_rejected() {
        assert!(bias_analysis_unpaired(&[lp(2, 0.5)]).is_err());
    }
}
