use serde::{Deserialize, Serialize};

use super::RunReport;
use crate::attribution::Method;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::stats::Side;

/// Mean and population standard deviation of one quantity across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

/// One `(method, metric)` cell folded over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub method: Method,
    pub metric: Metric,
    pub runs: usize,
    pub significant: usize,
    pub considerable: usize,
    /// Cohen's d over the significant runs with a finite effect size.
    pub effect: Option<MeanStd>,
    /// Significant runs whose effect size was degenerate (infinite).
    pub degenerate: usize,
    pub favours_a: usize,
    pub favours_b: usize,
    /// Majority direction among the significant runs; `None` on a tie.
    pub direction: Option<Side>,
}

impl CellAggregate {
    /// Significant-run count with a `+A` / `+B` direction marker and a `*`
    /// when most significant runs had a considerable effect size.
    pub fn count_cell(&self) -> String {
        let mut s = self.significant.to_string();
        if self.significant > 0 {
            match self.direction {
                Some(Side::A) => s.push_str("+A"),
                Some(Side::B) => s.push_str("+B"),
                None => {}
            }
            if 2 * self.considerable > self.significant {
                s.push('*');
            }
        }
        s
    }

    /// `(k) mean±std` of the effect sizes, or `(0) NA`.
    pub fn effect_cell(&self) -> String {
        format_effect(self.significant, self.effect.as_ref())
    }
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = if s == "-0.00" { "0.00".to_string() } else { s };
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

/// `(4) .16±.22` style: run count, then mean and std to two decimals
/// without a leading zero. `(k) NA` when no finite effect size exists.
pub fn format_effect(count: usize, effect: Option<&MeanStd>) -> String {
    match effect {
        Some(e) if count > 0 => format!("({count}) {}±{}", trim_number(e.mean), trim_number(e.std)),
        _ => format!("({count}) NA"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// Number of (run, method, metric) combinations.
    pub combinations: usize,
    pub significant: usize,
    pub considerable: usize,
    pub significant_fraction: f64,
    pub considerable_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSummary {
    pub accuracy: Option<MeanStd>,
    pub tpr: Option<MeanStd>,
    pub tnr: Option<MeanStd>,
    pub apd: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub runs: usize,
    pub cells: Vec<CellAggregate>,
    pub totals: Totals,
    pub bias: BiasSummary,
}

impl RunAggregate {
    pub fn cell(&self, method: Method, metric: Metric) -> Option<&CellAggregate> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.metric == metric)
    }
}

/// Folds per-run reports; every report must test the same cells in the same order.
pub fn aggregate_reports(reports: &[RunReport]) -> Result<RunAggregate> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Report("no runs to aggregate".into()))?;
    let keys: Vec<(Method, Metric)> = first
        .disparity
        .iter()
        .map(|d| (d.method, d.metric))
        .collect();
    for r in reports {
        let k: Vec<(Method, Metric)> = r.disparity.iter().map(|d| (d.method, d.metric)).collect();
        if k != keys {
            return Err(Error::Report(format!(
                "run {} tests a different set of cells",
                r.run
            )));
        }
    }

    let mut cells = Vec::with_capacity(keys.len());
    for (i, &(method, metric)) in keys.iter().enumerate() {
        let results: Vec<_> = reports.iter().map(|r| &r.disparity[i]).collect();
        let sig: Vec<_> = results.iter().filter(|d| d.significant).collect();
        let finite: Vec<f64> = sig
            .iter()
            .filter_map(|d| d.d)
            .filter(|d| d.is_finite())
            .collect();
        let favours_a = sig.iter().filter(|d| d.direction == Some(Side::A)).count();
        let favours_b = sig.iter().filter(|d| d.direction == Some(Side::B)).count();
        let direction = match favours_a.cmp(&favours_b) {
            std::cmp::Ordering::Greater => Some(Side::A),
            std::cmp::Ordering::Less => Some(Side::B),
            std::cmp::Ordering::Equal => None,
        };
        cells.push(CellAggregate {
            method,
            metric,
            runs: reports.len(),
            significant: sig.len(),
            considerable: results.iter().filter(|d| d.considerable).count(),
            effect: MeanStd::of(&finite),
            degenerate: sig
                .iter()
                .filter(|d| d.d.is_some_and(f64::is_infinite))
                .count(),
            favours_a,
            favours_b,
            direction,
        });
    }

    let combinations = keys.len() * reports.len();
    let significant: usize = cells.iter().map(|c| c.significant).sum();
    let considerable: usize = cells.iter().map(|c| c.considerable).sum();
    let fraction = |k: usize| {
        if combinations == 0 {
            0.0
        } else {
            k as f64 / combinations as f64
        }
    };
    let totals = Totals {
        combinations,
        significant,
        considerable,
        significant_fraction: fraction(significant),
        considerable_fraction: fraction(considerable),
    };

    let collect = |f: &dyn Fn(&RunReport) -> Option<f64>| {
        MeanStd::of(&reports.iter().filter_map(f).collect::<Vec<_>>())
    };
    let bias = BiasSummary {
        accuracy: collect(&|r| Some(r.test_accuracy)),
        tpr: collect(&|r| r.bias.tpr),
        tnr: collect(&|r| r.bias.tnr),
        apd: collect(&|r| r.bias.apd),
    };

    Ok(RunAggregate {
        runs: reports.len(),
        cells,
        totals,
        bias,
    })
}
