//! Rendering of audit reports: result grids, CSV tables and SVG box plots.

mod boxplot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use boxplot::{box_plot_svg, box_stats, quantile, BoxStats};

use crate::error::{Error, Result};
use crate::pipeline::{format_effect, AuditReport, CellAggregate, MeanStd};

fn table(report: &AuditReport, cell: impl Fn(&CellAggregate) -> String) -> String {
    let cfg = &report.config;
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(cfg.methods.len() + 1);
    let mut header = vec!["method".to_string()];
    header.extend(cfg.metrics.iter().map(|m| m.short_label().to_string()));
    rows.push(header);
    for &method in &cfg.methods {
        let mut row = vec![method.as_str().to_string()];
        for &metric in &cfg.metrics {
            row.push(
                report
                    .aggregate
                    .cell(method, metric)
                    .map(&cell)
                    .unwrap_or_else(|| "-".into()),
            );
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Grid of significant-run counts: rows are methods, columns metrics.
pub fn render_grid(report: &AuditReport) -> String {
    let mut out = table(report, CellAggregate::count_cell);
    let t = &report.aggregate.totals;
    let _ = writeln!(
        out,
        "\nruns significant at p <= {} out of {}; +A/+B: higher scores for A = {} or B = {}; *: |d| >= {} in most significant runs",
        report.config.disparity.alpha,
        report.aggregate.runs,
        report.subgroups.a,
        report.subgroups.b,
        report.config.disparity.d_threshold,
    );
    let _ = writeln!(
        out,
        "significant: {}/{} ({:.1}%), considerable: {}/{} ({:.1}%)",
        t.significant,
        t.combinations,
        100.0 * t.significant_fraction,
        t.considerable,
        t.combinations,
        100.0 * t.considerable_fraction,
    );
    out
}

/// Grid of `(k) mean±std` effect sizes over the significant runs.
pub fn render_effect_table(report: &AuditReport) -> String {
    table(report, CellAggregate::effect_cell)
}

fn mean_std(m: Option<&MeanStd>) -> String {
    match m {
        Some(m) => format!("{:.3}±{:.3}", m.mean, m.std),
        None => "NA".into(),
    }
}

/// TPR, TNR and APD with their standard deviation across runs.
pub fn render_bias(report: &AuditReport) -> String {
    let b = &report.aggregate.bias;
    format!(
        "accuracy {}  TPR {}  TNR {}  APD {}\n",
        mean_std(b.accuracy.as_ref()),
        mean_std(b.tpr.as_ref()),
        mean_std(b.tnr.as_ref()),
        mean_std(b.apd.as_ref()),
    )
}

/// Aggregated cells as CSV.
pub fn grid_csv(report: &AuditReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "metric",
        "runs",
        "significant",
        "considerable",
        "mean_d",
        "std_d",
        "direction",
        "cell",
    ])?;
    for c in &report.aggregate.cells {
        let (mean, std) = c
            .effect
            .map(|e| (e.mean.to_string(), e.std.to_string()))
            .unwrap_or_default();
        let direction = match c.direction {
            Some(crate::stats::Side::A) => report.subgroups.a.as_str(),
            Some(crate::stats::Side::B) => report.subgroups.b.as_str(),
            None => "",
        };
        w.write_record([
            c.method.as_str(),
            c.metric.as_str(),
            &c.runs.to_string(),
            &c.significant.to_string(),
            &c.considerable.to_string(),
            &mean,
            &std,
            direction,
            &format_effect(c.significant, c.effect.as_ref()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

/// Writes one SVG per `(method, metric)` with the scores of all runs pooled
/// per subgroup. Returns the written paths in grid order.
pub fn write_box_plots(report: &AuditReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (la, lb) = (&report.subgroups.a, &report.subgroups.b);
    let mut paths = Vec::new();
    for &method in &report.config.methods {
        for &metric in &report.config.metrics {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for s in report.runs.iter().flat_map(|r| &r.scores) {
                if s.method != method || s.metric != metric {
                    continue;
                }
                let Some(v) = s.value else { continue };
                if &s.subgroup == la {
                    a.push(v);
                } else if &s.subgroup == lb {
                    b.push(v);
                }
            }
            let title = format!("{} / {}", method.as_str(), metric.short_label());
            let svg = box_plot_svg(&title, &[(la.as_str(), &a), (lb.as_str(), &b)]);
            let path = dir.join(format!("{}_{}.svg", method.as_str(), metric.as_str()));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
    }
    Ok(paths)
}
