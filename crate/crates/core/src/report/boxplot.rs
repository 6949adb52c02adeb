use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Five-number summary with 1.5 IQR whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Smallest value not below `q1 - 1.5 IQR`.
    pub lower_whisker: f64,
    /// Largest value not above `q3 + 1.5 IQR`.
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
    pub n: usize,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`), the default of R and NumPy.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|x| *x >= lo_fence && *x <= hi_fence)
        .collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers: v
            .iter()
            .copied()
            .filter(|x| *x < lo_fence || *x > hi_fence)
            .collect(),
        n: v.len(),
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 320.0;
const HEIGHT: f64 = 260.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 40.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const COLORS: [&str; 2] = ["#4c72b0", "#c44e52"];

/// Side-by-side box plots of two groups as a standalone SVG 1.1 document.
/// Coordinates are printed with two decimals so output is byte-stable.
pub fn box_plot_svg(title: &str, groups: &[(&str, &[f64]); 2]) -> String {
    let stats: Vec<Option<BoxStats>> = groups.iter().map(|(_, v)| box_stats(v)).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in stats.iter().flatten() {
        lo = lo
            .min(s.lower_whisker)
            .min(s.outliers.first().copied().unwrap_or(f64::INFINITY));
        hi = hi
            .max(s.upper_whisker)
            .max(s.outliers.last().copied().unwrap_or(f64::NEG_INFINITY));
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;
    let slot = (WIDTH - LEFT - RIGHT) / 2.0;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="black"/>"#,
        TOP + plot_h
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.3}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            y(v) + 3.0,
            y = y(v),
        );
    }
    for (i, ((label, _), st)) in groups.iter().zip(&stats).enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.25;
        let color = COLORS[i];
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(label)
        );
        let Some(b) = st else { continue };
        let _ = writeln!(s, r#"<g class="box" data-n="{}">"#, b.n);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(b.upper_whisker),
            y(b.q3)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(b.q1),
            y(b.lower_whisker)
        );
        for w in [b.upper_whisker, b.lower_whisker] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                cx - half / 2.0,
                y(w),
                cx + half / 2.0,
                y(w)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6" stroke="black"/>"#,
            cx - half,
            y(b.q3),
            2.0 * half,
            (y(b.q1) - y(b.q3)).max(0.0)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(b.median),
            cx + half,
            y(b.median)
        );
        for o in &b.outliers {
            let _ = writeln!(
                s,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="{color}"/>"#,
                y(*o)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whiskers_follow_the_iqr_rule() {
        let b = box_stats(&[0.0, 1.0, 2.0, 3.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (1.0, 2.0, 3.0));
        assert_eq!(b.upper_whisker, 3.0);
        assert_eq!(b.lower_whisker, 0.0);
        assert_eq!(b.outliers, vec![100.0]);
    }

    #[test]
    fn interpolated_quartiles() {
        let b = box_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (1.75, 2.5, 3.25));
        assert!(box_stats(&[]).is_none());
        let one = box_stats(&[0.5]).unwrap();
        assert_eq!((one.q1, one.upper_whisker), (0.5, 0.5));
    }

    #[test]
    fn identical_groups_draw_identical_boxes() {
        let v = [0.1, 0.4, 0.35, 0.8, 0.2];
        let svg = box_plot_svg("GRAD / Gini", &[("MALE", &v), ("FEMALE", &v)]);
        let boxes: Vec<&str> = svg
            .split("<g class=\"box\"")
            .skip(1)
            .map(|g| g.split("</g>").next().unwrap())
            .collect();
        assert_eq!(boxes.len(), 2);
        let shape = |g: &str| -> Vec<String> {
            g.lines()
                .map(|l| {
                    l.split(' ')
                        .filter(|a| {
                            a.starts_with("y") || a.starts_with("height") || a.starts_with("cy")
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect()
        };
        assert_eq!(shape(boxes[0]), shape(boxes[1]));
    }

    #[test]
    fn svg_is_deterministic_and_escaped() {
        let a = [0.3, 0.1, 0.9];
        let b = [0.2];
        let one = box_plot_svg("IG <x> & y", &[("A", &a), ("B", &b)]);
        assert_eq!(one, box_plot_svg("IG <x> & y", &[("A", &a), ("B", &b)]));
        assert!(one.contains("IG &lt;x&gt; &amp; y"));
        assert!(one.starts_with("<?xml"));
        assert!(one.trim_end().ends_with("</svg>"));
    }
}
